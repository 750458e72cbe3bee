#include "sied/risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sied {

void RiskParams::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("RiskParams: alpha must be in [0, 1)");
  }
  if (!(theta_max >= 0.0)) {
    throw std::invalid_argument("RiskParams: theta_max must be >= 0");
  }
  if (!(tau >= 0.0)) {
    throw std::invalid_argument("RiskParams: tau must be >= 0");
  }
}

ConfidenceWindow::ConfidenceWindow(std::size_t capacity)
    : capacity_(capacity) {
  if (capacity == 0) {
    throw std::invalid_argument("ConfidenceWindow: capacity must be >= 1");
  }
}

void ConfidenceWindow::push(const InputGapEstimate& estimate) {
  entries_.push_back(estimate);
  while (entries_.size() > capacity_) {
    entries_.pop_front();
  }
}

double ConfidenceWindow::confidence() const {
  if (entries_.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& e : entries_) {
    const Eigen::MatrixXd solved = solve_symmetric(e.cov, e.gap);
    sum += e.gap.dot(solved.col(0));
  }
  return std::sqrt(std::max(sum, 0.0) / static_cast<double>(entries_.size()));
}

double cvar_gamma(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("cvar_gamma: alpha must be in [0, 1)");
  }
  return std::sqrt(alpha / (1.0 - alpha));
}

double ambiguity_radius(double confidence, const RiskParams& params) {
  params.validate();
  if (!(confidence >= 0.0)) {
    throw std::invalid_argument("ambiguity_radius: confidence must be >= 0");
  }
  double theta = params.theta_max * std::tanh(params.tau * confidence);
  // tanh saturates to 1.0 in double precision; keep the radius strictly
  // below the cap for finite confidence as the contract states
  if (theta >= params.theta_max && std::isfinite(confidence)) {
    theta = std::nextafter(params.theta_max, 0.0);
  }
  return theta;
}

double dr_cvar_bound(const LossDistribution& loss, double theta, double alpha) {
  const double gamma = cvar_gamma(alpha);
  return loss.mean + gamma * loss.stddev +
         theta * std::sqrt(1.0 + gamma * gamma);
}

double empirical_cvar(std::span<const double> samples, double alpha) {
  if (samples.empty()) {
    throw std::invalid_argument("empirical_cvar: empty sample set");
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("empirical_cvar: alpha must be in [0, 1)");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  // alpha-quantile as an order statistic; any minimizer z works, this one
  // keeps the discrete optimum exact.
  const std::size_t idx = std::min(
      n - 1, static_cast<std::size_t>(std::ceil(alpha * n) > 0
                                          ? std::ceil(alpha * n) - 1
                                          : 0));
  const double z = sorted[idx];
  double excess = 0.0;
  for (std::size_t i = idx + 1; i < n; ++i) {
    excess += sorted[i] - z;
  }
  return z + excess / ((1.0 - alpha) * static_cast<double>(n));
}

}  // namespace sied
