#include "garmentsynth/lexicon.hpp"

#include <cmath>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

using nlohmann::json;

Lexicon Lexicon::builtin() {
  Lexicon lex;
  lex.colors = {
      {"red", {1.0, 0.0, 0.0}},    {"green", {0.0, 0.7, 0.0}},  {"blue", {0.0, 0.0, 1.0}},
      {"navy", {0.0, 0.0, 0.35}},  {"purple", {0.7, 0.0, 0.8}}, {"yellow", {1.0, 1.0, 0.0}},
      {"gray", {0.5, 0.5, 0.5}},   {"pink", {1.0, 0.6, 0.8}},
  };
  for (int i = 0; i < static_cast<int>(lex.colors.size()); ++i) {
    lex.attribute_adjectives[lex.colors[i].name] = {AttributeFeature::Kind::kColor, i};
  }
  lex.attribute_adjectives["grey"] = {AttributeFeature::Kind::kColor, 6};

  auto length = [](Length l) { return AttributeFeature{AttributeFeature::Kind::kLength, -1, l}; };
  auto pattern = [](Pattern p) {
    return AttributeFeature{AttributeFeature::Kind::kPattern, -1, Length::kUnset, p};
  };
  lex.attribute_adjectives["long"] = length(Length::kLong);
  lex.attribute_adjectives["short"] = length(Length::kShort);
  lex.attribute_adjectives["plain"] = pattern(Pattern::kPlain);
  lex.attribute_adjectives["classic"] = pattern(Pattern::kPlain);
  lex.attribute_adjectives["solid"] = pattern(Pattern::kPlain);
  lex.attribute_adjectives["striped"] = pattern(Pattern::kStriped);

  lex.part_nouns = {
      {"body", PartId::kBody},       {"sleeve", PartId::kSleeves}, {"sleeves", PartId::kSleeves},
      {"collar", PartId::kCollar},   {"hood", PartId::kHood},      {"pocket", PartId::kPockets},
      {"pockets", PartId::kPockets}, {"button", PartId::kButtons}, {"buttons", PartId::kButtons},
      {"belt", PartId::kBelt},
  };
  for (const char* c : {"jacket", "sweater", "shirt", "dress", "coat", "hoodie"}) {
    lex.category_nouns[c] = c;
  }
  lex.conjunctions = {"and", "with", "a", "an", "the", "of", "featuring", "plus"};
  return lex;
}

std::optional<PartId> Lexicon::noun_part(const std::string& w) const {
  if (auto it = part_nouns.find(w); it != part_nouns.end()) return it->second;
  if (category_nouns.contains(w)) return PartId::kBody;
  return std::nullopt;
}

int Lexicon::nearest_color(const Rgb& c) const {
  int best = -1;
  double best_d = 0.0;
  for (int i = 0; i < static_cast<int>(colors.size()); ++i) {
    const double d = squared_distance(c, colors[i].rgb);
    if (best < 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

void Lexicon::validate() const {
  for (const auto& c : colors) {
    if (!in_unit_range(c.rgb)) throw Error(ErrorCode::kInvalidLexicon, "color out of range: " + c.name);
  }
  for (const auto& [word, feat] : attribute_adjectives) {
    if (feat.kind == AttributeFeature::Kind::kColor &&
        (feat.color_index < 0 || feat.color_index >= static_cast<int>(colors.size()))) {
      throw Error(ErrorCode::kInvalidLexicon, "adjective with bad color index: " + word);
    }
  }
  auto check_disjoint = [](const auto& a, const auto& b, const char* what) {
    for (const auto& entry : a) {
      const std::string& w = [&]() -> const std::string& {
        if constexpr (requires { entry.first; }) return entry.first;
        else return entry;
      }();
      if (b.contains(w)) throw Error(ErrorCode::kInvalidLexicon, std::string(what) + " overlap on '" + w + "'");
    }
  };
  check_disjoint(part_nouns, category_nouns, "part/category");
  check_disjoint(part_nouns, attribute_adjectives, "part/adjective");
  check_disjoint(category_nouns, attribute_adjectives, "category/adjective");
  check_disjoint(conjunctions, part_nouns, "conjunction/part");
  check_disjoint(conjunctions, category_nouns, "conjunction/category");
  check_disjoint(conjunctions, attribute_adjectives, "conjunction/adjective");
}

json Lexicon::to_json() const {
  json j;
  j["colors"] = json::array();
  for (const auto& c : colors) j["colors"].push_back({{"name", c.name}, {"rgb", {c.rgb.r, c.rgb.g, c.rgb.b}}});
  json adjectives = json::object();
  for (const auto& [word, feat] : attribute_adjectives) {
    switch (feat.kind) {
      case AttributeFeature::Kind::kColor:
        adjectives[word] = {{"color", colors.at(feat.color_index).name}};
        break;
      case AttributeFeature::Kind::kLength:
        adjectives[word] = {{"length", std::string(length_name(feat.length))}};
        break;
      case AttributeFeature::Kind::kPattern:
        adjectives[word] = {{"pattern", std::string(pattern_name(feat.pattern))}};
        break;
    }
  }
  j["adjectives"] = adjectives;
  json parts = json::object();
  for (const auto& [word, part] : part_nouns) parts[word] = std::string(part_name(part));
  j["part_nouns"] = parts;
  j["category_nouns"] = category_nouns;
  j["conjunctions"] = conjunctions;
  return j;
}

Lexicon Lexicon::from_json(const json& j) {
  Lexicon lex;
  try {
    std::map<std::string, int> color_index;
    for (const auto& c : j.at("colors")) {
      const auto& rgb = c.at("rgb");
      lex.colors.push_back({c.at("name").get<std::string>(),
                            {rgb.at(0).get<double>(), rgb.at(1).get<double>(), rgb.at(2).get<double>()}});
      color_index[lex.colors.back().name] = static_cast<int>(lex.colors.size()) - 1;
    }
    for (const auto& [word, entry] : j.at("adjectives").items()) {
      AttributeFeature feat;
      if (entry.contains("color")) {
        feat.kind = AttributeFeature::Kind::kColor;
        feat.color_index = color_index.at(entry.at("color").get<std::string>());
      } else if (entry.contains("length")) {
        feat.kind = AttributeFeature::Kind::kLength;
        feat.length = length_from_name(entry.at("length").get<std::string>()).value();
      } else {
        feat.kind = AttributeFeature::Kind::kPattern;
        feat.pattern = pattern_from_name(entry.at("pattern").get<std::string>()).value();
      }
      lex.attribute_adjectives[word] = feat;
    }
    for (const auto& [word, part] : j.at("part_nouns").items()) {
      lex.part_nouns[word] = part_from_name(part.get<std::string>()).value();
    }
    lex.category_nouns = j.at("category_nouns").get<std::map<std::string, std::string>>();
    lex.conjunctions = j.at("conjunctions").get<std::set<std::string>>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidLexicon, e.what());
  }
  lex.validate();
  return lex;
}

}  // namespace garmentsynth
