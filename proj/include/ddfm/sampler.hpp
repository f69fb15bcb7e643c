#pragma once

#include <cstdint>

#include "ddfm/rng.hpp"
#include "ddfm/schedule.hpp"
#include "ddfm/score.hpp"
#include "ddfm/tensor.hpp"

namespace ddfm {

// One reverse chain: current step, current state f_t and the noise stream.
struct SamplerState {
  int t = 0;
  ImageTensor f_t;
  NormalStream rng;

  // f_T ~ N(0, I) drawn as the first values of the stream.
  SamplerState(const NoiseSchedule& schedule, std::uint64_t seed, int height, int width,
               int channels);
};

// x0 estimate from a score: (f_t + (1 - abar_t) s) / sqrt(abar_t).
ImageTensor predict_x0(const ImageTensor& f_t, const ImageTensor& score, int t,
                       const NoiseSchedule& schedule);

struct ReverseCoefficients {
  double state = 0.0;     // multiplies f_t
  double estimate = 0.0;  // multiplies the x0 estimate
};

// sqrt(a_t)(1 - abar_{t-1}) / (1 - abar_t) and sqrt(abar_{t-1}) b_t / (1 - abar_t).
// When abar_{t-1} = 1 (t = 1, or a zero-beta prefix) the pair is exactly (0, 1).
ReverseCoefficients reverse_coefficients(int t, const NoiseSchedule& schedule);

// f_{t-1} = state * f_t + estimate * f0_hat + sigma_tilde_t * z. `z` is only
// read when sigma_tilde_t > 0 and may be empty otherwise.
ImageTensor reverse_step(const ImageTensor& f_t, const ImageTensor& f0_hat, int t,
                         const NoiseSchedule& schedule, const ImageTensor& z);

// Draws z for step t from the state's stream if sigma_tilde_t > 0, else
// returns an empty tensor without consuming the stream.
ImageTensor draw_step_noise(SamplerState& state, const NoiseSchedule& schedule, int t);

// Full reverse chain T..1 with no rectification.
ImageTensor sample_unconditional(ScoreModel& model, const NoiseSchedule& schedule,
                                 std::uint64_t seed, int height, int width, int channels);

}  // namespace ddfm
