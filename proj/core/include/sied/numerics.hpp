#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace sied {

/// Thrown when a matrix that must have full column rank does not
/// (e.g. the observed input map at zero obstacle speed).
class RankDeficiencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a covariance recursion produces a matrix whose negative
/// eigenvalues exceed the documented repair budget.
class CovarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (M + M^T)/2.
Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

/// Symmetrize and clip slightly negative eigenvalues to zero.
///
/// Eigenvalues below -tol_rel * max(trace, 1) indicate a genuinely broken
/// recursion and raise CovarianceError instead of being silently repaired.
Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov, double tol_rel,
                                  const std::string& context);

/// Condition number of a symmetric matrix (|lambda|_max / |lambda|_min).
double symmetric_condition(const Eigen::MatrixXd& m);

/// Solve S * X = rhs for symmetric S. When cond(S) exceeds 1e12 a Tikhonov
/// shift of 1e-10 * max(trace, 1) is applied and *regularized is set.
Eigen::MatrixXd solve_symmetric(const Eigen::MatrixXd& s,
                                const Eigen::MatrixXd& rhs,
                                bool* regularized = nullptr);

/// Round to 9 significant digits, the episode-log serialization precision.
/// Aggregation applies this to its inputs so that summaries computed from
/// in-memory logs and from re-parsed CSV files agree exactly.
double quantize_to_log_precision(double value);

}  // namespace sied
