#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "slhoi/model.hpp"
#include "slhoi/protocol.hpp"

namespace slhoi {

// Minimal TOML-style key-value file: [section] headers, key = value lines,
// '#' comments, values are quoted strings, booleans, or numbers. Keys are
// addressed as "section.key".
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::filesystem::path& file);
  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& raw() const { return values_; }

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

// Fully-resolved run description: model dimensions, protocol, training knobs,
// and data paths (made absolute against the config file's directory).
struct RunConfig {
  ModelConfig model;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/out";

  int iterations = 200;
  int batch_size = 8;
  int epoch_size = 0;       // 0: derive from dataset size / batch size
  double lr_override = -1;  // < 0: protocol base lr; > 0 replaces the base,
                            // keeping the protocol's decay boundaries
  int warmup = 0;           // linear lr ramp over the first N iterations
  double clip_norm = 0.0;   // global gradient-norm cap; 0 disables
  bool save_checkpoints = true;

  std::filesystem::path annotations;
  std::filesystem::path bank_dir;

  static RunConfig load(const std::filesystem::path& file);
  static RunConfig from_config(const ConfigFile& cfg, const std::filesystem::path& base_dir);

  // Canonical text form; load(emit()) reproduces an equivalent RunConfig.
  std::string emit() const;
};

}  // namespace slhoi
