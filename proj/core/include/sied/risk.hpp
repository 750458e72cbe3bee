#pragma once

#include <cstddef>
#include <deque>
#include <span>

#include "sied/estimation.hpp"
#include "sied/prediction.hpp"

namespace sied {

/// CVaR level, radius cap, and radius temperature.
struct RiskParams {
  double alpha = 0.85;     ///< CVaR tail level, in [0, 1)
  double theta_max = 5.0;  ///< maximum ambiguity radius, >= 0
  double tau = 1.0;        ///< radius sensitivity to confidence, >= 0

  void validate() const;
};

/// Ring buffer of the most recent input-gap estimates. The confidence score
/// is the windowed Mahalanobis norm of the stored gaps; an empty window
/// scores 0 so the radius starts at zero.
class ConfidenceWindow {
 public:
  explicit ConfidenceWindow(std::size_t capacity);

  void push(const InputGapEstimate& estimate);
  double confidence() const;

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  void clear() { entries_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<InputGapEstimate> entries_;
};

/// gamma = sqrt(alpha / (1 - alpha)). Rejects alpha outside [0, 1).
double cvar_gamma(double alpha);

/// theta = theta_max * tanh(tau * confidence); strictly below theta_max for
/// finite confidence.
double ambiguity_radius(double confidence, const RiskParams& params);

/// Closed-form upper bound on the worst-case CVaR over a Wasserstein ball of
/// radius theta around the nominal loss law:
///     mean + gamma * stddev + theta * sqrt(1 + gamma^2).
double dr_cvar_bound(const LossDistribution& loss, double theta, double alpha);

/// Sample CVaR: min over z of z + mean(max(S - z, 0)) / (1 - alpha),
/// attained at the alpha-quantile. Rejects empty input.
double empirical_cvar(std::span<const double> samples, double alpha);

}  // namespace sied
