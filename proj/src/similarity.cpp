#include "garmentsynth/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

namespace {

// Keeps the distance to white differentiable at white itself.
constexpr double kDistanceSmoothing = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double distance_to_white(const Rgb& c) { return std::sqrt(squared_distance(c, kWhite) + kDistanceSmoothing); }

double soft_colored(const Rgb& c) {
  return sigmoid(kCoverageSteepness * (distance_to_white(c) - kBackgroundEpsilon));
}

struct Factors {
  double color;       // color kernel
  double extent;      // length or presence factor
  double d_extent;    // d extent / d coverage
};

Factors factors(const ImageEmbedding& v, const TextEmbedding& w) {
  Factors f{};
  f.color = std::exp(-squared_distance(v.mean_color, w.color) / kColorKernelWidth);
  if (w.length_target) {
    const double diff = v.coverage - *w.length_target;
    f.extent = std::exp(-diff * diff / kLengthKernelWidth);
    f.d_extent = f.extent * (-2.0 * diff / kLengthKernelWidth);
  } else {
    const double gap = std::max(0.0, kPresenceFloor - v.coverage);
    f.extent = std::exp(-gap * gap / kLengthKernelWidth);
    f.d_extent = f.extent * (2.0 * gap / kLengthKernelWidth);
  }
  return f;
}

}  // namespace

TextEmbedding embed_ap(const AttributePhrase& ap, const Lexicon& lexicon) {
  TextEmbedding e;
  e.part = lexicon.noun_part(ap.noun.text).value_or(PartId::kBody);
  Rgb sum{};
  int n_colors = 0;
  for (const Token& adj : ap.adjectives) {
    auto it = lexicon.attribute_adjectives.find(adj.text);
    if (it == lexicon.attribute_adjectives.end()) continue;
    const AttributeFeature& f = it->second;
    if (f.kind == AttributeFeature::Kind::kColor) {
      const Rgb& c = lexicon.colors.at(f.color_index).rgb;
      sum.r += c.r;
      sum.g += c.g;
      sum.b += c.b;
      ++n_colors;
    } else if (f.kind == AttributeFeature::Kind::kLength) {
      e.length_target = length_target(f.length);
    }
  }
  if (n_colors > 0) e.color = {sum.r / n_colors, sum.g / n_colors, sum.b / n_colors};
  return e;
}

ImageEmbedding embed_part(const Image& image, const Mask& mask, PartId part) {
  const auto idx = mask.indices();
  if (idx.empty()) throw Error(ErrorCode::kEmptyMask, "cannot embed an empty region");
  ImageEmbedding e;
  e.part = part;
  // Color is averaged over colored pixels (soft-weighted), so a half-length
  // part keeps its hue instead of fading toward the white it leaves behind.
  Rgb sum{};
  double covered = 0.0;
  for (std::size_t i : idx) {
    const Rgb c = image.pixel(i);
    const double s = soft_colored(c);
    sum.r += s * c.r;
    sum.g += s * c.g;
    sum.b += s * c.b;
    covered += s;
  }
  e.mean_color = {sum.r / covered, sum.g / covered, sum.b / covered};
  e.coverage = covered / static_cast<double>(idx.size());
  return e;
}

double sim(const ImageEmbedding& v, const TextEmbedding& w) {
  if (v.part != w.part) return 0.0;
  const Factors f = factors(v, w);
  return f.color * f.extent;
}

double sim_full(const Image& image, const APTree& w, const World& world) {
  const LayoutTemplate& layout = world.templates.at(w.category);
  if (w.aps.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ap : w.aps) {
    const TextEmbedding te = embed_ap(ap, world.lexicon);
    total += sim(embed_part(image, layout.mask(te.part), te.part), te);
  }
  return total / static_cast<double>(w.aps.size());
}

Image grad_sim_image(const Image& image, const Mask& mask, PartId part, const TextEmbedding& w) {
  Image grad(image.width(), image.height(), Rgb{0.0, 0.0, 0.0});
  if (part != w.part) return grad;
  const ImageEmbedding v = embed_part(image, mask, part);
  const Factors f = factors(v, w);
  const auto idx = mask.indices();
  const double n = static_cast<double>(idx.size());
  const double total = v.coverage * n;  // sum of soft weights
  // u = d sim / d mean
  const double k_mean = f.extent * f.color * (-2.0 / kColorKernelWidth);
  const Rgb u{k_mean * (v.mean_color.r - w.color.r), k_mean * (v.mean_color.g - w.color.g),
              k_mean * (v.mean_color.b - w.color.b)};
  const double d_cov = f.color * f.d_extent;
  for (std::size_t i : idx) {
    const Rgb c = image.pixel(i);
    const double d = distance_to_white(c);
    const double s = sigmoid(kCoverageSteepness * (d - kBackgroundEpsilon));
    // d s / d c = ds_scale * (c - white)
    const double ds_scale = kCoverageSteepness * s * (1.0 - s) / d;
    const double through_weight = ((c.r - v.mean_color.r) * u.r + (c.g - v.mean_color.g) * u.g +
                                   (c.b - v.mean_color.b) * u.b) / total + d_cov / n;
    const double a = s / total;
    const double b = ds_scale * through_weight;
    grad.set_pixel(i, {a * u.r + b * (c.r - 1.0), a * u.g + b * (c.g - 1.0), a * u.b + b * (c.b - 1.0)});
  }
  return grad;
}

}  // namespace garmentsynth
