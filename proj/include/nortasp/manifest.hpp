#pragma once

// Run manifests. The deterministic part (command, input digests, seed,
// version, tolerances, parameters) is embedded in JSON artifacts; the full
// record, including absolute paths and wall-clock timestamps, goes to a
// sidecar "<artifact>.manifest.json" so artifacts stay byte-reproducible.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "nortasp/errors.hpp"
#include "nortasp/io.hpp"

namespace nortasp {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xf];
  }
  return out;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class RunManifest {
 public:
  explicit RunManifest(std::string command)
      : command_(std::move(command)), started_(std::chrono::system_clock::now()) {}

  // Records an input file and its SHA-256; returns the file contents.
  std::string add_input(const std::string& path) {
    std::string data = io::read_file(path);
    inputs_.push_back({path, sha256_hex(data)});
    return data;
  }

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_tolerance(const std::string& name, double v) { tolerances_[name] = v; }
  void add_parameter(const std::string& name, nlohmann::json v) { parameters_[name] = std::move(v); }

  // Deterministic fields only; input files by base name.
  nlohmann::json embedded() const {
    nlohmann::json ins = nlohmann::json::array();
    for (const auto& [path, digest] : inputs_) {
      ins.push_back({{"file", std::filesystem::path(path).filename().string()}, {"sha256", digest}});
    }
    nlohmann::json j = {{"command", command_},
                        {"tool_version", std::string(kToolVersion)},
                        {"inputs", std::move(ins)},
                        {"tolerances", tolerances_},
                        {"parameters", parameters_}};
    j["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
    return j;
  }

  static std::string sidecar_path(const std::string& artifact) { return artifact + ".manifest.json"; }

  // Writes the sidecar for every output artifact of the run.
  void write_sidecars(const std::vector<std::string>& outputs) const {
    nlohmann::json full = embedded();
    nlohmann::json ins = nlohmann::json::array();
    for (const auto& [path, digest] : inputs_) {
      std::error_code ec;
      const auto abs = std::filesystem::absolute(path, ec);
      ins.push_back({{"path", ec ? path : abs.string()}, {"sha256", digest}});
    }
    full["inputs"] = std::move(ins);
    full["started_utc"] = utc_timestamp(started_);
    full["finished_utc"] = utc_timestamp(std::chrono::system_clock::now());
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& o : outputs) {
      outs.push_back({{"path", o}, {"sha256", sha256_hex(io::read_file(o))}});
    }
    full["outputs"] = std::move(outs);
    for (const auto& o : outputs) io::write_file(sidecar_path(o), io::dump(full));
  }

 private:
  std::string command_;
  std::chrono::system_clock::time_point started_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::optional<std::uint64_t> seed_;
  nlohmann::json tolerances_ = nlohmann::json::object();
  nlohmann::json parameters_ = nlohmann::json::object();
};

}  // namespace nortasp
