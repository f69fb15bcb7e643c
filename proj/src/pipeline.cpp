#include "ddfm/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "ddfm/error.hpp"
#include "ddfm/png_io.hpp"
#include "ddfm/rng.hpp"
#include "ddfm/sampler.hpp"

namespace ddfm {

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kDdfm: return "ddfm";
    case FusionMode::kEmOnly: return "em_only";
    case FusionMode::kNoTv: return "no_tv";
    case FusionMode::kFixedPhi: return "fixed_phi";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  if (s == "ddfm") return FusionMode::kDdfm;
  if (s == "em_only") return FusionMode::kEmOnly;
  if (s == "no_tv") return FusionMode::kNoTv;
  if (s == "fixed_phi") return FusionMode::kFixedPhi;
  throw ConfigError("mode must be one of ddfm|em_only|no_tv|fixed_phi, got '" + s + "'");
}

void FusionConfig::validate() const {
  try {
    em.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (schedule.steps < 1) throw ConfigError("steps must be >= 1");
  if (schedule.stride < 1) throw ConfigError("stride must be >= 1");
  if (mode == FusionMode::kFixedPhi && !phi) throw ConfigError("mode fixed_phi requires phi");
  if (phi && !(*phi >= 0.0)) throw ConfigError("phi must be >= 0");
  if (em_iters < 0) throw ConfigError("em_iters must be >= 0");
}

// ---------------------------------------------------------------------------
// Fitting to a fixed model size.

std::string Fit::describe() const {
  if (height == orig_height && width == orig_width) return "none";
  return std::to_string(orig_height) + "x" + std::to_string(orig_width) + "->" +
         std::to_string(height) + "x" + std::to_string(width) + " offset(" +
         std::to_string(row_offset) + "," + std::to_string(col_offset) + ")";
}

Fit plan_fit(int height, int width, std::optional<SizeHint> target) {
  Fit f{height, width, height, width, 0, 0};
  if (!target) return f;
  f.height = target->height;
  f.width = target->width;
  // Positive offset: padding before the image; negative: rows/cols cropped.
  f.row_offset = (target->height - height) / 2;
  f.col_offset = (target->width - width) / 2;
  if (target->height < height) f.row_offset = -((height - target->height) / 2);
  if (target->width < width) f.col_offset = -((width - target->width) / 2);
  return f;
}

namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace

ImageTensor apply_fit(const ImageTensor& img, const Fit& fit) {
  if (fit.height == img.height() && fit.width == img.width()) return img;
  ImageTensor out(fit.height, fit.width, img.channels());
  for (int r = 0; r < fit.height; ++r) {
    const int sr = reflect_index(r - fit.row_offset, img.height());
    for (int c = 0; c < fit.width; ++c) {
      const int sc = reflect_index(c - fit.col_offset, img.width());
      for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = img.at(sr, sc, ch);
    }
  }
  return out;
}

ImageTensor undo_fit(const ImageTensor& img, const Fit& fit) {
  const int h = std::min(fit.orig_height, fit.height);
  const int w = std::min(fit.orig_width, fit.width);
  if (h == img.height() && w == img.width()) return img;
  const int r0 = std::max(fit.row_offset, 0);
  const int c0 = std::max(fit.col_offset, 0);
  ImageTensor out(h, w, img.channels());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < img.channels(); ++ch) out.at(r, c, ch) = img.at(r + r0, c + c0, ch);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

NoiseSchedule resolve_schedule(const FusionConfig& config, const ScoreModel& model) {
  NoiseSchedule base = [&] {
    if (auto native = model.native_schedule()) {
      return NoiseSchedule::from_betas(native->betas(), config.schedule.variance);
    }
    return build_linear_schedule(config.schedule.steps, config.schedule.beta_start,
                                 config.schedule.beta_end, config.schedule.variance);
  }();
  return base.strided(config.schedule.stride);
}

ImageTensor default_prior_mean(const ImageTensor& ir, const ImageTensor& vis) {
  const ImageTensor ir_b = ir.channels() == vis.channels() ? ir : broadcast_ir(ir, vis.channels());
  ImageTensor mean = 0.5 * (ir_b + vis);
  return normalize(mean);
}

namespace {

struct Prepared {
  ImageTensor ir;   // normalized, replicated to vis channels, fitted
  ImageTensor vis;  // normalized, fitted
  Fit fit;
};

Prepared prepare_inputs(const ImageTensor& ir, const ImageTensor& vis,
                        std::optional<SizeHint> target) {
  if (ir.channels() != 1) {
    throw ShapeError("infrared input must have 1 channel, got " + std::to_string(ir.channels()));
  }
  if (vis.channels() != 1 && vis.channels() != 3) {
    throw ShapeError("visible input must have 1 or 3 channels, got " +
                     std::to_string(vis.channels()));
  }
  if (ir.height() != vis.height() || ir.width() != vis.width()) {
    throw ShapeError("infrared and visible images differ in size");
  }
  Prepared p;
  p.fit = plan_fit(vis.height(), vis.width(), target);
  p.ir = apply_fit(broadcast_ir(normalize(ir), vis.channels()), p.fit);
  p.vis = apply_fit(normalize(vis), p.fit);
  return p;
}

void describe_config(RunManifest& m, const FusionConfig& c) {
  m.set("mode", to_string(c.mode));
  m.set("seed", std::to_string(c.seed));
  m.set("psi", c.mode == FusionMode::kNoTv ? 0.0 : c.em.psi);
  m.set("eta", c.em.eta);
  m.set("epsilon_clamp", c.em.epsilon_clamp);
  m.set("expectation_form", em::to_string(c.em.form));
  m.set("phi", c.phi ? format_real(*c.phi) : std::string("adaptive"));
  m.set("rng", std::string(NormalStream::kName));
}

void describe_inputs(RunManifest& m, const ImageTensor& ir, const ImageTensor& vis,
                     const Fit& fit) {
  m.set("ir_sha256", tensor_sha256(ir));
  m.set("vis_sha256", tensor_sha256(vis));
  m.set("input_size", std::to_string(vis.height()) + "x" + std::to_string(vis.width()) + "x" +
                          std::to_string(vis.channels()));
  m.set("crop_pad", fit.describe());
}

void describe_schedule(RunManifest& m, const NoiseSchedule& s, const FusionConfig& c) {
  m.set("schedule.steps", static_cast<long long>(s.steps()));
  m.set("schedule.stride", static_cast<long long>(c.schedule.stride));
  m.set("schedule.variance", to_string(s.variance_mode()));
  m.set("schedule.beta_first", s.beta(1));
  m.set("schedule.beta_last", s.beta(s.steps()));
  m.set("schedule.alpha_bar_last", s.alpha_bar(s.steps()));
  m.set("schedule.betas_sha256",
        bytes_sha256(s.betas().data(), s.betas().size() * sizeof(double)));
}

StepRecord to_record(int step, const em::RectifyTrace& t) {
  return {step, t.q, t.x_loss_before, t.x_loss_after, t.split_before, t.split_after, t.gamma, t.rho};
}

em::EmParams effective_params(const FusionConfig& config) {
  em::EmParams p = config.em;
  if (config.mode == FusionMode::kNoTv) p.psi = 0.0;
  if (config.mode == FusionMode::kFixedPhi) p.fixed_phi = config.phi;
  return p;
}

FusionResult finish(ImageTensor state, const Fit& fit, RunManifest manifest,
                    std::chrono::steady_clock::time_point start) {
  FusionResult result;
  result.normalized = undo_fit(state, fit);
  result.fused = denormalize(clamp(result.normalized, -1.0, 1.0));
  manifest.set("output_sha256", tensor_sha256(quantize8(result.fused)));
  manifest.set("status", std::string("complete"));
  manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace

FusionResult ddfm_fuse(const ImageTensor& ir, const ImageTensor& vis, const FusionConfig& config,
                       ScoreModel& model, const FusionHooks& hooks) {
  if (config.mode == FusionMode::kEmOnly) return em_only_fuse(ir, vis, config, hooks);
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Prepared in = prepare_inputs(ir, vis, model.supported_size());
  const NoiseSchedule schedule = resolve_schedule(config, model);
  const em::EmParams params = effective_params(config);

  RunManifest manifest;
  describe_config(manifest, config);
  describe_inputs(manifest, ir, vis, in.fit);
  describe_schedule(manifest, schedule, config);
  manifest.set("score", model.describe());

  const int h = in.vis.height(), w = in.vis.width(), nc = in.vis.channels();
  SamplerState chain(schedule, config.seed, h, w, nc);
  em::EmState em_state = em::EmState::initial(h, w, nc);
  const int total = schedule.steps();
  try {
    // Internal step t = T..1 is loop counter t - 1 = T-1..0 of the algorithm.
    for (int t = total; t >= 1; --t) {
      const ImageTensor score = model.evaluate(chain.f_t, t, schedule);
      const ImageTensor f0_tilde = predict_x0(chain.f_t, score, t, schedule);
      em::RectifyResult rect = em::em_rectify(f0_tilde, in.ir, in.vis, em_state, params);
      manifest.trace.push_back(to_record(t, rect.trace));
      const ImageTensor z = draw_step_noise(chain, schedule, t);
      chain.f_t = reverse_step(chain.f_t, rect.f0_hat, t, schedule, z);
      chain.t = t - 1;
      if (hooks.on_step) hooks.on_step(total - t + 1, total);
    }
  } catch (const std::exception& e) {
    manifest.set("status", std::string("aborted: ") + e.what());
    if (hooks.on_abort) hooks.on_abort(manifest);
    throw;
  }
  manifest.set("final_gamma", em_state.gamma);
  manifest.set("final_rho", em_state.rho);
  return finish(std::move(chain.f_t), in.fit, std::move(manifest), start);
}

FusionResult em_only_fuse(const ImageTensor& ir, const ImageTensor& vis,
                          const FusionConfig& config, const FusionHooks& hooks) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const Prepared in = prepare_inputs(ir, vis, std::nullopt);
  const int iters = config.em_iters > 0 ? config.em_iters : config.schedule.steps;
  const em::EmParams params = config.em;

  RunManifest manifest;
  describe_config(manifest, config);
  describe_inputs(manifest, ir, vis, in.fit);
  manifest.set("em_iters", static_cast<long long>(iters));
  manifest.set("score", std::string("none"));

  const int h = in.vis.height(), w = in.vis.width(), nc = in.vis.channels();
  em::EmState em_state = em::EmState::initial(h, w, nc);
  ImageTensor f = in.vis;  // x = 0
  try {
    for (int it = 1; it <= iters; ++it) {
      em::RectifyResult rect = em::em_rectify(f, in.ir, in.vis, em_state, params);
      manifest.trace.push_back(to_record(it, rect.trace));
      f = std::move(rect.f0_hat);
      if (hooks.on_step) hooks.on_step(it, iters);
    }
  } catch (const std::exception& e) {
    manifest.set("status", std::string("aborted: ") + e.what());
    if (hooks.on_abort) hooks.on_abort(manifest);
    throw;
  }
  manifest.set("final_gamma", em_state.gamma);
  manifest.set("final_rho", em_state.rho);
  return finish(std::move(f), in.fit, std::move(manifest), start);
}

}  // namespace ddfm
