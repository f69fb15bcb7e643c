#include "ddfm/sampler.hpp"

#include <cmath>

#include "ddfm/error.hpp"

namespace ddfm {

namespace {

void check_step(int t, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) {
    throw ParameterError("step " + std::to_string(t) + " outside [1," +
                         std::to_string(schedule.steps()) + "]");
  }
}

}  // namespace

SamplerState::SamplerState(const NoiseSchedule& schedule, std::uint64_t seed, int height,
                           int width, int channels)
    : t(schedule.steps()), rng(seed) {
  f_t = rng.normal_tensor(height, width, channels);
}

ImageTensor predict_x0(const ImageTensor& f_t, const ImageTensor& score, int t,
                       const NoiseSchedule& schedule) {
  check_step(t, schedule);
  if (!f_t.same_shape(score)) throw ShapeError("predict_x0: score shape differs from f_t");
  if (!score.all_finite()) throw NumericError("predict_x0: non-finite score");
  const double abar = schedule.alpha_bar(t);
  const double inv_scale = 1.0 / std::sqrt(abar);
  const double noise = 1.0 - abar;
  ImageTensor out(f_t.height(), f_t.width(), f_t.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (f_t[i] + noise * score[i]) * inv_scale;
  }
  if (!out.all_finite()) throw NumericError("predict_x0: non-finite estimate");
  return out;
}

ReverseCoefficients reverse_coefficients(int t, const NoiseSchedule& schedule) {
  check_step(t, schedule);
  const double abar_prev = schedule.alpha_bar(t - 1);
  if (abar_prev == 1.0) return {0.0, 1.0};
  const double abar = schedule.alpha_bar(t);
  const double denom = 1.0 - abar;
  return {std::sqrt(schedule.alpha(t)) * (1.0 - abar_prev) / denom,
          std::sqrt(abar_prev) * schedule.beta(t) / denom};
}

ImageTensor reverse_step(const ImageTensor& f_t, const ImageTensor& f0_hat, int t,
                         const NoiseSchedule& schedule, const ImageTensor& z) {
  if (!f_t.same_shape(f0_hat)) throw ShapeError("reverse_step: f0_hat shape differs from f_t");
  const auto coef = reverse_coefficients(t, schedule);
  const double sigma = schedule.sigma_tilde(t);
  const bool noisy = sigma > 0.0;
  if (noisy && !z.same_shape(f_t)) throw ShapeError("reverse_step: z shape differs from f_t");
  ImageTensor out(f_t.height(), f_t.width(), f_t.channels());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = coef.state * f_t[i] + coef.estimate * f0_hat[i];
    if (noisy) v += sigma * z[i];
    out[i] = v;
  }
  if (!out.all_finite()) throw NumericError("reverse_step: non-finite state");
  return out;
}

ImageTensor draw_step_noise(SamplerState& state, const NoiseSchedule& schedule, int t) {
  if (schedule.sigma_tilde(t) > 0.0) {
    return state.rng.normal_tensor(state.f_t.height(), state.f_t.width(), state.f_t.channels());
  }
  return {};
}

ImageTensor sample_unconditional(ScoreModel& model, const NoiseSchedule& schedule,
                                 std::uint64_t seed, int height, int width, int channels) {
  SamplerState state(schedule, seed, height, width, channels);
  for (int t = schedule.steps(); t >= 1; --t) {
    const ImageTensor score = model.evaluate(state.f_t, t, schedule);
    const ImageTensor f0 = predict_x0(state.f_t, score, t, schedule);
    const ImageTensor z = draw_step_noise(state, schedule, t);
    state.f_t = reverse_step(state.f_t, f0, t, schedule, z);
    state.t = t - 1;
  }
  return state.f_t;
}

}  // namespace ddfm
