#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "garmentsynth/manipulation.hpp"

namespace garmentsynth {

struct SynthCase {
  std::string prompt;
  std::uint64_t seed = 0;
};

struct EditCase {
  std::string old_prompt;
  std::string new_prompt;
  std::uint64_t seed = 0;
};

struct SuiteSpec {
  std::vector<SynthCase> synthesis;
  std::vector<EditCase> edits;
  Config cfg;

  // Prompts parse, categories exist, seeds distinct within each list.
  // Throws the parser's errors or InvalidConfig.
  void validate(const World& world) const;
  std::vector<std::string> categories(const World& world) const;

  static SuiteSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SynthesisResult {
  APTree tree;
  Image image;
};

// Fraction of results with any prompted part inferred absent. 0 when empty.
double part_leakage_rate(const std::vector<SynthesisResult>& results, const World& world);

// Fraction of (phrase, part) pairs whose inferred attribute differs from the
// phrase's, counting a missing part as confused. 0 when there are no phrases.
double attribute_confusion_rate(const std::vector<SynthesisResult>& results, const World& world);

// Per-result counts behind the two rates.
bool leaks(const SynthesisResult& r, const World& world);
std::size_t confused_phrases(const SynthesisResult& r, const World& world,
                             const std::vector<std::size_t>* only = nullptr);

struct SynthCaseReport {
  std::string prompt;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  bool leaked = false;
  std::size_t phrases = 0;
  std::size_t confused = 0;
  double l_hungarian = 0.0;
  GarmentScene inferred;

  friend bool operator==(const SynthCaseReport&, const SynthCaseReport&) = default;
};

struct EditCaseReport {
  std::string old_prompt;
  std::string new_prompt;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  bool realized = false;           // edited phrases all recovered from I*
  double consistency = 0.0;        // blending on
  double consistency_unblended = 0.0;
  bool noop_identical = false;     // old -> old edit reproduces I bit for bit
  std::size_t keep_pixels = 0;

  friend bool operator==(const EditCaseReport&, const EditCaseReport&) = default;
};

struct Variant {
  std::string name;
  bool consensus = true;
  bool bundle = true;
};

// both_off, l1_only, l2_only, both_on.
std::vector<Variant> ablation_variants();

struct SuiteReport {
  std::string variant;
  Config cfg;
  std::optional<double> leakage_rate;      // null with no synthesis cases
  std::optional<double> confusion_rate;
  std::optional<double> mean_consistency;  // null with no edit cases
  std::optional<double> mean_consistency_unblended;
  std::optional<double> realized_rate;
  std::optional<double> noop_identical_rate;
  std::vector<SynthCaseReport> synthesis;
  std::vector<EditCaseReport> edits;

  nlohmann::json to_json(const Lexicon& lexicon) const;
  static SuiteReport from_json(const nlohmann::json& j);
};

// One report per variant; per-case failures are recorded in the case report.
std::vector<SuiteReport> run_suite(const SuiteSpec& spec, const World& world,
                                   const std::vector<Variant>& variants = ablation_variants());

}  // namespace garmentsynth
