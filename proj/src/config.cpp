#include "ddfm/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ddfm/error.hpp"

namespace ddfm::config {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "mode",     "steps",   "psi",        "eta",       "phi",
      "seed",     "score",   "mu0",        "var0",      "jobs",
      "beta_start", "beta_end", "sampler_variance", "stride", "em_iters",
      "expectation_form", "epsilon_clamp"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool is_known_key(const std::string& key) { return known_keys().count(key) > 0; }

Settings parse_config_text(const std::string& text) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!is_known_key(key)) {
      throw ConfigError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError("config line " + std::to_string(number) + ": empty value for '" + key + "'");
    }
    out[key] = value;
  }
  return out;
}

Settings load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

Settings merge(Settings base, const Settings& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
  return base;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a real number, got '" + value + "'");
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": expected an unsigned 64-bit integer, got '" + value + "'");
  }
  return v;
}

FusionConfig fusion_config_from(const Settings& s) {
  FusionConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = s.find(key);
    return it == s.end() ? nullptr : &it->second;
  };
  if (auto v = get("mode")) c.mode = parse_fusion_mode(*v);
  if (auto v = get("seed")) c.seed = parse_u64("seed", *v);
  if (auto v = get("psi")) c.em.psi = parse_real("psi", *v);
  if (auto v = get("eta")) c.em.eta = parse_real("eta", *v);
  if (auto v = get("epsilon_clamp")) c.em.epsilon_clamp = parse_real("epsilon_clamp", *v);
  if (auto v = get("expectation_form")) c.em.form = em::parse_expectation_form(*v);
  if (auto v = get("phi")) c.phi = parse_real("phi", *v);
  if (auto v = get("steps")) c.schedule.steps = static_cast<int>(parse_int("steps", *v));
  if (auto v = get("stride")) c.schedule.stride = static_cast<int>(parse_int("stride", *v));
  if (auto v = get("beta_start")) c.schedule.beta_start = parse_real("beta_start", *v);
  if (auto v = get("beta_end")) c.schedule.beta_end = parse_real("beta_end", *v);
  if (auto v = get("sampler_variance")) c.schedule.variance = parse_sampler_variance(*v);
  if (auto v = get("em_iters")) {
    c.em_iters = static_cast<int>(parse_int("em_iters", *v));
    if (c.em_iters < 1) throw ConfigError("em_iters must be >= 1");
  }
  if (c.schedule.beta_start <= 0.0 || c.schedule.beta_start > c.schedule.beta_end ||
      c.schedule.beta_end >= 1.0) {
    throw ConfigError("betas must satisfy 0 < beta_start <= beta_end < 1");
  }
  c.validate();
  return c;
}

ScoreSelection score_selection_from(const Settings& s,
                                    const std::optional<std::string>& env_endpoint) {
  ScoreSelection sel;
  const auto it = s.find("score");
  const std::string choice = it == s.end() ? "analytic" : it->second;
  if (choice == "analytic") {
    sel.kind = ScoreSelection::Kind::kAnalytic;
  } else if (choice == "remote") {
    if (!env_endpoint || env_endpoint->empty()) {
      throw ConfigError("--score remote needs HOST:PORT or DDFM_SCORE_ENDPOINT");
    }
    sel.kind = ScoreSelection::Kind::kRemote;
    sel.endpoint = net::Endpoint::parse(*env_endpoint);
  } else if (choice.rfind("remote:", 0) == 0) {
    sel.kind = ScoreSelection::Kind::kRemote;
    sel.endpoint = net::Endpoint::parse(choice.substr(7));
  } else {
    throw ConfigError("score must be analytic, remote or remote:HOST:PORT, got '" + choice + "'");
  }
  if (auto m = s.find("mu0"); m != s.end()) sel.mu0 = m->second;
  if (auto v = s.find("var0"); v != s.end()) {
    sel.var0 = parse_real("var0", v->second);
    if (!(sel.var0 > 0.0)) throw ConfigError("var0 must be > 0");
  }
  return sel;
}

}  // namespace ddfm::config
