#pragma once

#include <map>
#include <optional>
#include <string>

#include "ddfm/net.hpp"
#include "ddfm/pipeline.hpp"

namespace ddfm::config {

// Flat key -> value settings. Keys use underscores (`beta_start`); the CLI
// maps `--beta-start` onto the same key.
using Settings = std::map<std::string, std::string>;

// `key = value` per line, `#` starts a comment, blank lines ignored.
// Unknown keys and malformed lines raise ConfigError naming the line.
Settings parse_config_text(const std::string& text);
// Throws IoError when the file cannot be read.
Settings load_config_file(const std::string& path);

bool is_known_key(const std::string& key);

// Later layers win: merge(defaults_or_file, flags).
Settings merge(Settings base, const Settings& overrides);

double parse_real(const std::string& key, const std::string& value);
long long parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);

FusionConfig fusion_config_from(const Settings& s);

struct ScoreSelection {
  enum class Kind { kAnalytic, kRemote } kind = Kind::kAnalytic;
  net::Endpoint endpoint;           // kRemote
  std::optional<std::string> mu0;   // kAnalytic: PNG path; default prior mean when absent
  double var0 = 0.1;
};

// `score = analytic | remote | remote:HOST:PORT`. A bare `remote` takes its
// endpoint from `env_endpoint` (the DDFM_SCORE_ENDPOINT variable).
ScoreSelection score_selection_from(const Settings& s,
                                    const std::optional<std::string>& env_endpoint);

}  // namespace ddfm::config
