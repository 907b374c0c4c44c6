#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace garmentsynth {

inline constexpr int kCanvasSize = 64;
inline constexpr int kLatentSize = 16;
inline constexpr int kPoolFactor = kCanvasSize / kLatentSize;
inline constexpr int kChannels = 3;
inline constexpr std::size_t kLatentPixels = kLatentSize * kLatentSize;

// Distance from white below which a region counts as background.
inline constexpr double kBackgroundEpsilon = 0.1;

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{1.0, 1.0, 1.0};
inline constexpr Rgb kNeutralGray{0.5, 0.5, 0.5};

double squared_distance(const Rgb& a, const Rgb& b);
bool in_unit_range(const Rgb& c);

enum class PartId : int { kBody = 0, kSleeves, kCollar, kHood, kPockets, kButtons, kBelt };
inline constexpr int kNumPartTypes = 7;

std::string_view part_name(PartId part);
std::optional<PartId> part_from_name(std::string_view name);
inline int part_index(PartId part) { return static_cast<int>(part); }

enum class Length { kUnset, kShort, kLong };
enum class Pattern { kUnset, kPlain, kStriped };

std::string_view length_name(Length length);
std::optional<Length> length_from_name(std::string_view name);
std::string_view pattern_name(Pattern pattern);
std::optional<Pattern> pattern_from_name(std::string_view name);

// Coverage fraction a part of each length occupies within its template mask.
inline double length_target(Length length) { return length == Length::kShort ? 0.5 : 1.0; }

}  // namespace garmentsynth
