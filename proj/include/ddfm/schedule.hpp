#pragma once

#include <string>
#include <vector>

namespace ddfm {

enum class SamplerVariance { kZero, kPosterior };

std::string to_string(SamplerVariance v);
SamplerVariance parse_sampler_variance(const std::string& s);

// Discrete variance-preserving schedule.
//
// Steps are 1-based: t = 1..T index the tables, t = 0 is the clean image with
// alpha_bar(0) = 1 by definition. The reverse loop "for t = T-1 down to 0"
// used to describe the fusion algorithm visits internal steps T..1, i.e.
// internal step s corresponds to loop counter s - 1.
class NoiseSchedule {
 public:
  // Arbitrary beta table (e.g. advertised by a remote checkpoint). Betas must
  // lie in [0,1); zero betas are accepted for test schedules.
  static NoiseSchedule from_betas(std::vector<double> betas,
                                  SamplerVariance variance = SamplerVariance::kZero);

  int steps() const { return static_cast<int>(beta_.size()); }

  double beta(int t) const { return beta_.at(t - 1); }
  double alpha(int t) const { return alpha_.at(t - 1); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_.at(t - 1); }
  double sigma_tilde(int t) const { return sigma_tilde_.at(t - 1); }
  SamplerVariance variance_mode() const { return variance_; }

  // Index into the checkpoint's own timestep table for internal step t.
  // Identity minus one for full schedules; remapped for strided ones.
  int model_timestep(int t) const { return model_timestep_.at(t - 1); }

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

  // Every `stride`-th step of this schedule, with betas re-derived so that
  // alpha_bar at the kept steps is unchanged. The last step (T) is always kept.
  NoiseSchedule strided(int stride) const;

  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;

 private:
  void derive();

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_tilde_;
  std::vector<int> model_timestep_;
  SamplerVariance variance_ = SamplerVariance::kZero;
};

// beta linearly interpolated from beta_start (t = 1) to beta_end (t = T).
// Requires T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule build_linear_schedule(int steps, double beta_start, double beta_end,
                                    SamplerVariance variance = SamplerVariance::kZero);

}  // namespace ddfm
