#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddfm/tensor.hpp"

namespace ddfm {

// One rectification pass as observed by the pipeline.
struct StepRecord {
  int step = 0;  // internal step t for diffusion runs, iteration index for EM-only runs
  double q = 0.0;
  double x_loss_before = 0.0;
  double x_loss_after = 0.0;
  double split_before = 0.0;
  double split_after = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
};

// Everything needed, together with the input files, to reproduce a run.
// Serialized as `key = value` lines; reals use 17 significant digits.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> entries;  // ordered
  std::vector<StepRecord> trace;
  double wall_clock_seconds = 0.0;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  const std::string* get(const std::string& key) const;

  // Deterministic text (no timing).
  std::string to_text() const;
  // Timing sidecar, kept separate so the manifest itself is reproducible.
  std::string timing_text() const;

  static RunManifest parse(const std::string& text);
};

std::string format_real(double v);

// Hex SHA-256 of shape + raw samples.
std::string tensor_sha256(const ImageTensor& t);
std::string bytes_sha256(const void* data, std::size_t size);

// Writes to `path.tmp` then renames over `path`.
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace ddfm
