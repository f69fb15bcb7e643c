#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "ddfm/em.hpp"
#include "ddfm/manifest.hpp"
#include "ddfm/schedule.hpp"
#include "ddfm/score.hpp"
#include "ddfm/tensor.hpp"

namespace ddfm {

enum class FusionMode { kDdfm, kEmOnly, kNoTv, kFixedPhi };

std::string to_string(FusionMode m);
FusionMode parse_fusion_mode(const std::string& s);

struct ScheduleConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  SamplerVariance variance = SamplerVariance::kZero;
  int stride = 1;  // evaluate every stride-th step; 1 = full chain
};

struct FusionConfig {
  FusionMode mode = FusionMode::kDdfm;
  std::uint64_t seed = 0;
  em::EmParams em;
  std::optional<double> phi;  // required for kFixedPhi
  int em_iters = 0;           // kEmOnly iterations; 0 means "same as the chain length"
  ScheduleConfig schedule;

  void validate() const;  // throws ConfigError
};

// How inputs were fitted to a fixed-size score model. Offsets are into the
// fitted canvas (pad) or into the original image (crop), per axis.
struct Fit {
  int orig_height = 0, orig_width = 0;
  int height = 0, width = 0;
  int row_offset = 0, col_offset = 0;  // >0: padded by this much before; <0: cropped
  std::string describe() const;
};

// Center-crop each axis larger than the target, reflect-pad each smaller one.
Fit plan_fit(int height, int width, std::optional<SizeHint> target);
ImageTensor apply_fit(const ImageTensor& img, const Fit& fit);
// Keeps only the region that came from the original image.
ImageTensor undo_fit(const ImageTensor& img, const Fit& fit);

struct FusionHooks {
  std::function<void(int done, int total)> on_step;
  // Invoked with the partial manifest before an error propagates.
  std::function<void(const RunManifest&)> on_abort;
};

struct FusionResult {
  ImageTensor fused;       // [0,255], clamped, in the fitted-then-unpadded geometry
  ImageTensor normalized;  // final state before clamping, [-1,1] nominal
  RunManifest manifest;
};

// Schedule actually used for a run: the model's native table when it has
// one, otherwise the configured linear schedule; then strided.
NoiseSchedule resolve_schedule(const FusionConfig& config, const ScoreModel& model);

// Conditional sampling with one EM rectification per reverse step.
// ir: 1 channel in [0,255]; vis: 1 or 3 channels in [0,255], same H x W.
// Dispatches on config.mode (kEmOnly ignores the score model).
FusionResult ddfm_fuse(const ImageTensor& ir, const ImageTensor& vis, const FusionConfig& config,
                       ScoreModel& model, const FusionHooks& hooks = {});

// EM iterations from x = 0 (f = v) with no diffusion prior.
FusionResult em_only_fuse(const ImageTensor& ir, const ImageTensor& vis,
                          const FusionConfig& config, const FusionHooks& hooks = {});

// Analytic prior used when no explicit mean image is supplied: the
// normalized average of the (replicated) infrared and visible images.
ImageTensor default_prior_mean(const ImageTensor& ir, const ImageTensor& vis);

}  // namespace ddfm
