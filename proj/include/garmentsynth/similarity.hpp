#pragma once

#include <optional>
#include <vector>

#include "garmentsynth/garment_world.hpp"
#include "garmentsynth/prompt_parser.hpp"

namespace garmentsynth {

inline constexpr double kColorKernelWidth = 0.5;    // tau_c
inline constexpr double kLengthKernelWidth = 0.1;   // tau_l
inline constexpr double kCoverageSteepness = 50.0;
// Coverage below which a part without a stated length counts as missing.
inline constexpr double kPresenceFloor = 0.5;

struct TextEmbedding {
  Rgb color = kNeutralGray;
  std::optional<double> length_target;
  PartId part = PartId::kBody;
};

struct ImageEmbedding {
  Rgb mean_color;
  double coverage = 0.0;
  PartId part = PartId::kBody;
};

TextEmbedding embed_ap(const AttributePhrase& ap, const Lexicon& lexicon);

// Throws EmptyMask.
ImageEmbedding embed_part(const Image& image, const Mask& mask, PartId part);

// Kernel similarity in [0, 1]; zero when the part one-hots differ.
double sim(const ImageEmbedding& v, const TextEmbedding& w);

// Mean over phrases of the regional similarity inside each phrase's part mask.
double sim_full(const Image& image, const APTree& w, const World& world);

// d sim / d pixel for every pixel of the image; zero outside the mask.
Image grad_sim_image(const Image& image, const Mask& mask, PartId part, const TextEmbedding& w);

}  // namespace garmentsynth
