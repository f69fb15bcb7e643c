#include "ddfm/schedule.hpp"

#include <cmath>

#include "ddfm/error.hpp"

namespace ddfm {

std::string to_string(SamplerVariance v) {
  return v == SamplerVariance::kZero ? "zero" : "posterior";
}

SamplerVariance parse_sampler_variance(const std::string& s) {
  if (s == "zero") return SamplerVariance::kZero;
  if (s == "posterior") return SamplerVariance::kPosterior;
  throw ConfigError("sampler_variance must be 'zero' or 'posterior', got '" + s + "'");
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas, SamplerVariance variance) {
  if (betas.empty()) throw ParameterError("schedule needs at least one step");
  for (double b : betas) {
    if (!(b >= 0.0 && b < 1.0)) {
      throw ParameterError("beta " + std::to_string(b) + " outside [0,1)");
    }
  }
  NoiseSchedule s;
  s.beta_ = std::move(betas);
  s.variance_ = variance;
  s.model_timestep_.resize(s.beta_.size());
  for (std::size_t i = 0; i < s.beta_.size(); ++i) s.model_timestep_[i] = static_cast<int>(i);
  s.derive();
  return s;
}

void NoiseSchedule::derive() {
  const std::size_t n = beta_.size();
  alpha_.resize(n);
  alpha_bar_.resize(n);
  sigma_tilde_.assign(n, 0.0);
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    alpha_[i] = 1.0 - beta_[i];
    prod *= alpha_[i];
    alpha_bar_[i] = prod;
  }
  if (variance_ == SamplerVariance::kPosterior) {
    // DDPM posterior variance (1 - abar_{t-1}) / (1 - abar_t) * beta_t.
    for (std::size_t i = 0; i < n; ++i) {
      const double prev = i == 0 ? 1.0 : alpha_bar_[i - 1];
      const double denom = 1.0 - alpha_bar_[i];
      sigma_tilde_[i] = denom > 0.0 ? std::sqrt((1.0 - prev) / denom * beta_[i]) : 0.0;
    }
  }
}

NoiseSchedule NoiseSchedule::strided(int stride) const {
  if (stride < 1) throw ParameterError("stride must be >= 1");
  if (stride == 1) return *this;
  std::vector<int> kept;  // internal steps, ascending
  for (int t = steps(); t >= 1; t -= stride) kept.insert(kept.begin(), t);
  NoiseSchedule s;
  s.variance_ = variance_;
  double prev_bar = 1.0;
  for (int t : kept) {
    s.beta_.push_back(1.0 - alpha_bar(t) / prev_bar);
    s.model_timestep_.push_back(model_timestep(t));
    prev_bar = alpha_bar(t);
  }
  s.derive();
  return s;
}

NoiseSchedule build_linear_schedule(int steps, double beta_start, double beta_end,
                                    SamplerVariance variance) {
  if (steps < 1) throw ParameterError("steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ParameterError("require 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule::from_betas(std::move(betas), variance);
}

}  // namespace ddfm
