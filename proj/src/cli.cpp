#include "ddfm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "ddfm/config.hpp"
#include "ddfm/error.hpp"
#include "ddfm/metrics.hpp"
#include "ddfm/pipeline.hpp"
#include "ddfm/png_io.hpp"
#include "ddfm/remote_score.hpp"
#include "ddfm/sampler.hpp"

namespace ddfm::cli {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e)) {
    return kConfigError;
  }
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const InputRangeError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e)) {
    return kIoError;
  }
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProtocolError*>(&e) ||
      dynamic_cast<const CapabilityError*>(&e)) {
    return kTransportError;
  }
  return kInternalError;
}

namespace {

// Options shared by fuse and sample that may also come from a config file.
struct SettingFlags {
  std::vector<std::pair<std::string, std::unique_ptr<std::string>>> values;
  std::vector<CLI::Option*> options;
  std::string config_path;
  CLI::Option* config_opt = nullptr;

  void add(CLI::App& app, const std::string& key, const std::string& help) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    values.emplace_back(key, std::make_unique<std::string>());
    options.push_back(app.add_option(flag, *values.back().second, help));
  }

  config::Settings resolve() const {
    config::Settings file;
    if (config_opt && config_opt->count() > 0) file = config::load_config_file(config_path);
    config::Settings flags;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (options[i]->count() > 0) flags[values[i].first] = *values[i].second;
    }
    return config::merge(std::move(file), flags);
  }
};

void add_fusion_flags(CLI::App& app, SettingFlags& f) {
  f.add(app, "mode", "ddfm | em_only | no_tv | fixed_phi (default ddfm)");
  f.add(app, "steps", "diffusion steps T, also the em_only iteration count (default 1000)");
  f.add(app, "psi", "TV weight (default 0.5)");
  f.add(app, "eta", "splitting weight (default 0.1)");
  f.add(app, "phi", "fixed infrared-prior weight for fixed_phi mode");
  f.add(app, "seed", "RNG seed (default 0)");
  f.add(app, "em_iters", "em_only iterations (default: steps)");
  f.add(app, "expectation_form", "posterior | as_printed (default posterior)");
  f.add(app, "epsilon_clamp", "lower bound on residual magnitudes (default 1e-6)");
}

void add_schedule_flags(CLI::App& app, SettingFlags& f) {
  f.add(app, "beta_start", "first beta of the linear schedule (default 1e-4)");
  f.add(app, "beta_end", "last beta of the linear schedule (default 0.02)");
  f.add(app, "sampler_variance", "zero | posterior (default zero)");
  f.add(app, "stride", "use every stride-th step (default 1)");
}

void add_score_flags(CLI::App& app, SettingFlags& f) {
  f.add(app, "score", "analytic | remote | remote:HOST:PORT (default analytic)");
  f.add(app, "mu0", "prior mean image for the analytic score (default: mean of the sources)");
  f.add(app, "var0", "prior variance for the analytic score (default 0.1)");
}

std::optional<std::string> env_endpoint() {
  if (const char* e = std::getenv("DDFM_SCORE_ENDPOINT")) return std::string(e);
  return std::nullopt;
}

int jobs_from(const config::Settings& s) {
  const auto it = s.find("jobs");
  if (it == s.end()) return 1;
  const long long j = config::parse_int("jobs", it->second);
  if (j < 1) throw ConfigError("jobs must be >= 1");
  return static_cast<int>(j);
}

ImageTensor read_ir(const std::string& path) {
  ImageTensor ir = read_png(path);
  return ir.channels() == 1 ? ir : luma(ir);
}

std::string sidecar_path(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  p.replace_extension(suffix);
  return p.string();
}

ImageTensor load_mu0(const std::string& path, int channels) {
  ImageTensor m = read_png(path);
  if (m.channels() == 1 && channels > 1) m = broadcast_ir(m, channels);
  if (m.channels() != channels) throw ShapeError("mu0 channel count does not match the images");
  return normalize(m);
}

std::unique_ptr<ScoreModel> make_score(const config::ScoreSelection& sel, const ImageTensor& mu0) {
  if (sel.kind == config::ScoreSelection::Kind::kRemote) {
    return std::make_unique<RemoteScore>(sel.endpoint);
  }
  return std::make_unique<AnalyticGaussianScore>(mu0, sel.var0);
}

// Runs `count` jobs on up to `workers` threads; returns per-job exit codes.
std::vector<int> run_jobs(int count, int workers, const std::function<int(int)>& job) {
  std::vector<int> codes(count, kOk);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) codes[i] = job(i);
  };
  const int n = std::max(1, std::min(workers, count));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return codes;
}

int first_failure(const std::vector<int>& codes) {
  for (int c : codes) {
    if (c != kOk) return c;
  }
  return kOk;
}

std::vector<std::string> png_names(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: '" + dir + "'");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

// ---------------------------------------------------------------------------

struct FuseArgs {
  std::string ir, vis, out;
  bool verbose = false;
  SettingFlags settings;
};

void fuse_pair(const std::string& ir_path, const std::string& vis_path, const std::string& out,
               const FusionConfig& config, const config::ScoreSelection& sel, bool verbose,
               std::ostream& err, std::mutex& err_mutex) {
  const ImageTensor ir = read_ir(ir_path);
  const ImageTensor vis = read_png(vis_path);
  const ImageTensor mu0 = sel.mu0 ? load_mu0(*sel.mu0, vis.channels()) : default_prior_mean(ir, vis);

  FusionHooks hooks;
  const std::string manifest_path = sidecar_path(out, ".manifest.txt");
  hooks.on_abort = [&](const RunManifest& partial) {
    try {
      write_text_atomic(manifest_path, partial.to_text());
    } catch (const std::exception&) {
    }
  };
  if (verbose) {
    hooks.on_step = [&](int done, int total) {
      std::lock_guard lock(err_mutex);
      err << out << ": step " << done << "/" << total << "\n";
    };
  }

  FusionResult result;
  if (config.mode == FusionMode::kEmOnly) {
    result = em_only_fuse(ir, vis, config, hooks);
  } else {
    std::unique_ptr<ScoreModel> model = make_score(sel, mu0);
    result = ddfm_fuse(ir, vis, config, *model, hooks);
  }
  if (const fs::path parent = fs::path(out).parent_path(); !parent.empty()) {
    fs::create_directories(parent);
  }
  const std::string tmp = out + ".tmp.png";
  write_png(tmp, result.fused);
  std::error_code ec;
  fs::rename(tmp, out, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + out + "': " + ec.message());
  write_text_atomic(manifest_path, result.manifest.to_text());
  write_text_atomic(sidecar_path(out, ".timing.txt"), result.manifest.timing_text());
}

int cmd_fuse(FuseArgs& a, std::ostream& out, std::ostream& err) {
  const config::Settings s = a.settings.resolve();
  const FusionConfig config = config::fusion_config_from(s);
  const config::ScoreSelection sel = config::score_selection_from(s, env_endpoint());
  const int jobs = jobs_from(s);
  std::mutex err_mutex;

  if (!fs::is_directory(a.ir)) {
    fuse_pair(a.ir, a.vis, a.out, config, sel, a.verbose, err, err_mutex);
    out << "wrote " << a.out << "\n";
    return kOk;
  }

  const auto ir_names = png_names(a.ir);
  const auto vis_names = png_names(a.vis);
  std::vector<std::string> orphans;
  std::set_symmetric_difference(ir_names.begin(), ir_names.end(), vis_names.begin(),
                                vis_names.end(), std::back_inserter(orphans));
  if (!orphans.empty()) {
    err << "unmatched files:";
    for (const auto& o : orphans) err << " " << o;
    err << "\n";
    return kIoError;
  }
  if (ir_names.empty()) {
    err << "no PNG pairs in '" << a.ir << "'\n";
    return kIoError;
  }
  fs::create_directories(a.out);
  const auto codes = run_jobs(static_cast<int>(ir_names.size()), jobs, [&](int i) {
    const std::string& name = ir_names[i];
    try {
      fuse_pair((fs::path(a.ir) / name).string(), (fs::path(a.vis) / name).string(),
                (fs::path(a.out) / name).string(), config, sel, a.verbose, err, err_mutex);
      return static_cast<int>(kOk);
    } catch (const std::exception& e) {
      std::lock_guard lock(err_mutex);
      err << name << ": " << e.what() << "\n";
      return exit_code_for(e);
    }
  });
  out << "fused " << std::count(codes.begin(), codes.end(), kOk) << "/" << codes.size()
      << " pairs into " << a.out << "\n";
  return first_failure(codes);
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string fused, ir, vis, out;
  int jobs = 1;
};

std::string format_row(const std::string& label, const metrics::MetricsReport& r) {
  std::string line = label;
  char buf[64];
  for (double v : r.as_vector()) {
    std::snprintf(buf, sizeof buf, ",%.12f", v);
    line += buf;
  }
  return line + "\n";
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  if (a.jobs < 1) throw ConfigError("jobs must be >= 1");
  const auto f = png_names(a.fused), i = png_names(a.ir), v = png_names(a.vis);
  std::set<std::string> all(f.begin(), f.end());
  all.insert(i.begin(), i.end());
  all.insert(v.begin(), v.end());
  std::vector<std::string> orphans, names;
  for (const auto& n : all) {
    const bool in_all = std::binary_search(f.begin(), f.end(), n) &&
                        std::binary_search(i.begin(), i.end(), n) &&
                        std::binary_search(v.begin(), v.end(), n);
    (in_all ? names : orphans).push_back(n);
  }
  if (!orphans.empty()) {
    err << "unmatched files:";
    for (const auto& o : orphans) err << " " << o;
    err << "\n";
    return kIoError;
  }
  if (names.empty()) {
    err << "no image triplets found\n";
    return kIoError;
  }

  std::vector<metrics::MetricsReport> rows(names.size());
  std::vector<std::string> errors(names.size());
  const auto codes = run_jobs(static_cast<int>(names.size()), a.jobs, [&](int k) {
    try {
      const std::string& n = names[k];
      rows[k] = metrics::evaluate_all(read_png((fs::path(a.fused) / n).string()),
                                      read_png((fs::path(a.ir) / n).string()),
                                      read_png((fs::path(a.vis) / n).string()));
      return static_cast<int>(kOk);
    } catch (const std::exception& e) {
      errors[k] = names[k] + ": " + e.what();
      return exit_code_for(e);
    }
  });
  if (const int code = first_failure(codes); code != kOk) {
    for (const auto& e : errors) {
      if (!e.empty()) err << e << "\n";
    }
    return code;
  }

  std::string table = "image";
  for (const auto& c : metrics::column_names()) table += "," + c;
  table += "\n";
  for (std::size_t k = 0; k < names.size(); ++k) table += format_row(names[k], rows[k]);
  table += format_row("mean", metrics::mean_report(rows));
  if (a.out.empty()) {
    out << table;
  } else {
    write_text_atomic(a.out, table);
    out << "wrote " << a.out << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string out;
  std::string size = "16x16";
  int channels = 1;
  int chains = 1;
  SettingFlags settings;
};

std::pair<int, int> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("size must look like HxW, got '" + s + "'");
  const long long h = config::parse_int("size", s.substr(0, x));
  const long long w = config::parse_int("size", s.substr(x + 1));
  if (h < 1 || w < 1) throw ConfigError("size must be positive");
  return {static_cast<int>(h), static_cast<int>(w)};
}

int cmd_sample(SampleArgs& a, std::ostream& out) {
  const config::Settings s = a.settings.resolve();
  const FusionConfig config = config::fusion_config_from(s);
  const config::ScoreSelection sel = config::score_selection_from(s, env_endpoint());
  if (a.chains < 1) throw ConfigError("chains must be >= 1");
  if (a.channels != 1 && a.channels != 3) throw ConfigError("channels must be 1 or 3");

  auto [h, w] = parse_size(a.size);
  ImageTensor mu0;
  if (sel.mu0) {
    mu0 = load_mu0(*sel.mu0, a.channels);
    h = mu0.height();
    w = mu0.width();
  } else {
    mu0 = ImageTensor(h, w, a.channels);
  }
  std::unique_ptr<ScoreModel> model = make_score(sel, mu0);
  if (auto hint = model->supported_size()) {
    h = hint->height;
    w = hint->width;
    if (!mu0.empty() && (mu0.height() != h || mu0.width() != w)) mu0 = ImageTensor(h, w, a.channels);
  }
  const NoiseSchedule schedule = resolve_schedule(config, *model);

  std::vector<ImageTensor> samples;
  for (int c = 0; c < a.chains; ++c) {
    samples.push_back(sample_unconditional(*model, schedule, config.seed + c, h, w, a.channels));
  }
  const std::size_t n = samples.front().size();
  double mean_dev = 0.0, mean_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (const auto& smp : samples) m += smp[i];
    m /= a.chains;
    double v = 0.0;
    for (const auto& smp : samples) v += (smp[i] - m) * (smp[i] - m);
    mean_var += a.chains > 1 ? v / (a.chains - 1) : 0.0;
    mean_dev += std::abs(m - mu0[i]);
  }
  out << "chains " << a.chains << ", size " << h << "x" << w << "x" << a.channels << ", steps "
      << schedule.steps() << "\n";
  out << "mean |pixel mean - mu0| " << format_real(mean_dev / n) << "\n";
  out << "mean pixel variance " << format_real(mean_var / n);
  if (sel.kind == config::ScoreSelection::Kind::kAnalytic) out << " (var0 " << format_real(sel.var0) << ")";
  out << "\n";
  if (!a.out.empty()) {
    write_png(a.out, denormalize(clamp(samples.front(), -1.0, 1.0)));
    out << "wrote " << a.out << "\n";
  }
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const SelftestOps* ops) {
  CLI::App app{"Diffusion-based infrared/visible image fusion", "ddfm"};
  app.require_subcommand(1);

  FuseArgs fuse;
  CLI::App* fuse_cmd = app.add_subcommand("fuse", "fuse one pair, or every pair in two directories");
  fuse_cmd->add_option("--ir", fuse.ir, "infrared PNG or directory")->required();
  fuse_cmd->add_option("--vis", fuse.vis, "visible PNG or directory")->required();
  fuse_cmd->add_option("--out", fuse.out, "output PNG or directory")->required();
  fuse_cmd->add_flag("--verbose", fuse.verbose, "print a per-step counter");
  add_fusion_flags(*fuse_cmd, fuse.settings);
  add_schedule_flags(*fuse_cmd, fuse.settings);
  add_score_flags(*fuse_cmd, fuse.settings);
  fuse.settings.add(*fuse_cmd, "jobs", "parallel image pairs in directory mode (default 1)");
  fuse.settings.config_opt = fuse_cmd->add_option("--config", fuse.settings.config_path,
                                                  "key = value config file");

  EvaluateArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "metrics table for matched image triplets");
  eval_cmd->add_option("--fused", eval.fused, "directory of fused PNGs")->required();
  eval_cmd->add_option("--ir", eval.ir, "directory of infrared PNGs")->required();
  eval_cmd->add_option("--vis", eval.vis, "directory of visible PNGs")->required();
  eval_cmd->add_option("--out", eval.out, "CSV path (default: standard output)");
  eval_cmd->add_option("--jobs", eval.jobs, "parallel images");

  SampleArgs sample;
  CLI::App* sample_cmd = app.add_subcommand("sample", "unconditional sampling sanity check");
  sample_cmd->add_option("--out", sample.out, "PNG for the first chain's sample");
  sample_cmd->add_option("--size", sample.size, "HxW when no mu0 is given (default 16x16)");
  sample_cmd->add_option("--channels", sample.channels, "1 or 3 (default 1)");
  sample_cmd->add_option("--chains", sample.chains, "independent chains (default 1)");
  sample.settings.add(*sample_cmd, "steps", "diffusion steps T (default 1000)");
  sample.settings.add(*sample_cmd, "seed", "seed of the first chain (default 0)");
  add_schedule_flags(*sample_cmd, sample.settings);
  add_score_flags(*sample_cmd, sample.settings);
  sample.settings.config_opt = sample_cmd->add_option("--config", sample.settings.config_path,
                                                      "key = value config file");

  bool quick = false;
  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run the numerical oracle suite");
  selftest_cmd->add_flag("--quick", quick, "reduced sample counts, finishes in seconds");

  std::vector<std::string> argv_store{"ddfm"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kConfigError;
  }

  try {
    if (*fuse_cmd) return cmd_fuse(fuse, out, err);
    if (*eval_cmd) return cmd_evaluate(eval, out, err);
    if (*sample_cmd) return cmd_sample(sample, out);
    if (*selftest_cmd) {
      const bool ok = run_selftest({quick}, ops ? *ops : SelftestOps{}, out);
      return ok ? kOk : kSelftestFailure;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kInternalError;
}

}  // namespace ddfm::cli
