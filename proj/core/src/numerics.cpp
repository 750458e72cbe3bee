#include "sied/numerics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace sied {

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

Eigen::MatrixXd repair_covariance(const Eigen::MatrixXd& cov, double tol_rel,
                                  const std::string& context) {
  Eigen::MatrixXd sym = symmetrized(cov);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig >= 0.0) {
    return sym;
  }
  const double budget = tol_rel * std::max(sym.trace(), 1.0);
  if (min_eig < -budget) {
    throw CovarianceError(context + ": eigenvalue " + std::to_string(min_eig) +
                          " below repair budget " + std::to_string(-budget));
  }
  Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clipped.asDiagonal() *
         eig.eigenvectors().transpose();
}

double symmetric_condition(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(m));
  const double max_abs = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double min_abs = eig.eigenvalues().cwiseAbs().minCoeff();
  if (min_abs == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return max_abs / min_abs;
}

Eigen::MatrixXd solve_symmetric(const Eigen::MatrixXd& s,
                                const Eigen::MatrixXd& rhs,
                                bool* regularized) {
  Eigen::MatrixXd sym = symmetrized(s);
  if (regularized != nullptr) {
    *regularized = false;
  }
  if (symmetric_condition(sym) > 1e12) {
    const double shift = 1e-10 * std::max(sym.trace(), 1.0);
    sym += shift * Eigen::MatrixXd::Identity(sym.rows(), sym.cols());
    if (regularized != nullptr) {
      *regularized = true;
    }
  }
  return sym.ldlt().solve(rhs);
}

double quantize_to_log_precision(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return std::strtod(buf, nullptr);
}

}  // namespace sied
