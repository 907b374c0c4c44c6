#include "garmentsynth/types.hpp"

namespace garmentsynth {

double squared_distance(const Rgb& a, const Rgb& b) {
  const double dr = a.r - b.r;
  const double dg = a.g - b.g;
  const double db = a.b - b.b;
  return dr * dr + dg * dg + db * db;
}

bool in_unit_range(const Rgb& c) {
  auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  return ok(c.r) && ok(c.g) && ok(c.b);
}

namespace {
constexpr std::array<std::string_view, kNumPartTypes> kPartNames = {
    "body", "sleeves", "collar", "hood", "pockets", "buttons", "belt"};
}

std::string_view part_name(PartId part) { return kPartNames.at(part_index(part)); }

std::optional<PartId> part_from_name(std::string_view name) {
  for (int i = 0; i < kNumPartTypes; ++i) {
    if (kPartNames[i] == name) return static_cast<PartId>(i);
  }
  return std::nullopt;
}

std::string_view length_name(Length length) {
  switch (length) {
    case Length::kShort: return "short";
    case Length::kLong: return "long";
    case Length::kUnset: break;
  }
  return "unset";
}

std::optional<Length> length_from_name(std::string_view name) {
  if (name == "short") return Length::kShort;
  if (name == "long") return Length::kLong;
  if (name == "unset") return Length::kUnset;
  return std::nullopt;
}

std::string_view pattern_name(Pattern pattern) {
  switch (pattern) {
    case Pattern::kPlain: return "plain";
    case Pattern::kStriped: return "striped";
    case Pattern::kUnset: break;
  }
  return "unset";
}

std::optional<Pattern> pattern_from_name(std::string_view name) {
  if (name == "plain") return Pattern::kPlain;
  if (name == "striped") return Pattern::kStriped;
  if (name == "unset") return Pattern::kUnset;
  return std::nullopt;
}

}  // namespace garmentsynth
