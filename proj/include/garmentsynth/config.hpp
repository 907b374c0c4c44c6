#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace garmentsynth {

// Sampler and pipeline settings. Readable from a flat `key = value` file.
struct Config {
  int steps = 50;                 // T
  double alpha = 0.05;            // consensus guidance step
  double beta = 0.05;             // bundle guidance step
  double window_lo = 0.2;         // guidance active for window_lo*T <= t <= window_hi*T
  double window_hi = 0.8;
  double percentile = 0.75;       // attention binarization threshold
  double temperature = 0.2;       // attention softmax temperature
  double lambda = 20.0;           // text-conditioning strength of the prototype prior
  double beta_start = 1e-4;       // linear noise schedule endpoints
  double beta_end = 0.35;
  std::size_t bank_cap = 4096;    // prototypes per category
  std::uint64_t bank_seed = 0;
  std::uint64_t seed = 0;
  std::string lexicon_path;       // empty: built-in lexicon
  std::string templates_path;     // empty: built-in templates

  // Throws InvalidConfig / InvalidPercentile.
  void validate() const;
  bool in_window(int t) const;

  // Applies `key = value` lines on top of the current values.
  void apply_text(std::string_view text);
  void apply_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  nlohmann::json to_json() const;
  static Config from_json(const nlohmann::json& j);

  friend bool operator==(const Config&, const Config&) = default;
};

// Environment variable naming a config file read before command-line flags.
inline constexpr const char* kConfigEnvVar = "GARMENTSYNTH_CONFIG";

}  // namespace garmentsynth
