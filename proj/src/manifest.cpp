#include "ddfm/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddfm/error.hpp"

namespace ddfm {

std::string format_real(double v) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

void RunManifest::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

void RunManifest::set(const std::string& key, double value) { set(key, format_real(value)); }

void RunManifest::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

const std::string* RunManifest::get(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return &v;
  }
  return nullptr;
}

std::string RunManifest::to_text() const {
  std::ostringstream os;
  os << "# ddfm run manifest v1\n";
  for (const auto& [k, v] : entries) os << k << " = " << v << "\n";
  os << "trace.columns = step q x_loss_before x_loss_after split_before split_after gamma rho\n";
  os << "trace.count = " << trace.size() << "\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    os << "trace." << i << " = " << r.step << ' ' << format_real(r.q) << ' '
       << format_real(r.x_loss_before) << ' ' << format_real(r.x_loss_after) << ' '
       << format_real(r.split_before) << ' ' << format_real(r.split_after) << ' '
       << format_real(r.gamma) << ' ' << format_real(r.rho) << "\n";
  }
  return os.str();
}

std::string RunManifest::timing_text() const {
  return "wall_clock_seconds = " + format_real(wall_clock_seconds) + "\n";
}

RunManifest RunManifest::parse(const std::string& text) {
  RunManifest m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ConfigError("manifest line without ' = ': " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    if (key == "trace.columns" || key == "trace.count") continue;
    if (key.rfind("trace.", 0) == 0) {
      std::istringstream fields(value);
      StepRecord r;
      fields >> r.step >> r.q >> r.x_loss_before >> r.x_loss_after >> r.split_before >>
          r.split_after >> r.gamma >> r.rho;
      if (!fields) throw ConfigError("malformed trace line: " + line);
      m.trace.push_back(r);
    } else {
      m.entries.emplace_back(key, value);
    }
  }
  return m;
}

std::string bytes_sha256(const void* data, std::size_t size) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

std::string tensor_sha256(const ImageTensor& t) {
  std::string blob = std::to_string(t.height()) + "x" + std::to_string(t.width()) + "x" +
                     std::to_string(t.channels()) + ":";
  const auto* raw = reinterpret_cast<const char*>(t.values().data());
  blob.append(raw, t.size() * sizeof(double));
  return bytes_sha256(blob.data(), blob.size());
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

}  // namespace ddfm
