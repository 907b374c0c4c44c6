#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "garmentsynth/types.hpp"

namespace garmentsynth {

struct NamedColor {
  std::string name;
  Rgb rgb;
};

struct AttributeFeature {
  enum class Kind { kColor, kLength, kPattern };

  Kind kind = Kind::kColor;
  int color_index = -1;  // into Lexicon::colors when kind == kColor
  Length length = Length::kUnset;
  Pattern pattern = Pattern::kUnset;
};

// Closed-world vocabulary. Colors are ordered; the order is the tie-break
// order when snapping an observed color to the nearest lexicon color.
struct Lexicon {
  std::vector<NamedColor> colors;
  std::map<std::string, AttributeFeature> attribute_adjectives;
  std::map<std::string, PartId> part_nouns;
  std::map<std::string, std::string> category_nouns;  // word -> category id
  std::set<std::string> conjunctions;

  static Lexicon builtin();
  static Lexicon from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // Throws InvalidLexicon when word sets overlap or a color is out of range.
  void validate() const;

  bool is_adjective(const std::string& w) const { return attribute_adjectives.contains(w); }
  bool is_part_noun(const std::string& w) const { return part_nouns.contains(w); }
  bool is_category_noun(const std::string& w) const { return category_nouns.contains(w); }
  bool is_conjunction(const std::string& w) const { return conjunctions.contains(w); }

  // Part a noun refers to; category nouns name the body piece.
  std::optional<PartId> noun_part(const std::string& w) const;

  // Nearest lexicon color by Euclidean RGB distance, lowest index on ties.
  int nearest_color(const Rgb& c) const;
};

}  // namespace garmentsynth
