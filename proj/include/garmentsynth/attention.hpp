#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "garmentsynth/alignment.hpp"
#include "garmentsynth/latent.hpp"

namespace garmentsynth {

inline constexpr double kAttentionTemperature = 0.2;  // tau_a
inline constexpr double kDefaultPercentile = 0.75;

// Query/key layout: rgb(3), |rgb|^2, soft part membership (7), constant.
inline constexpr std::size_t kFeatureDim = 12;
using Feature = std::array<double, kFeatureDim>;

struct AttentionMap {
  std::vector<double> p = std::vector<double>(kLatentPixels, 1.0 / kLatentPixels);
};

struct TokenKey {
  Feature features{};
  bool is_noun = false;
  bool depends_on_color = false;  // color adjectives score pixels by color distance
};

struct TokenRef {
  std::size_t ap = 0;
  std::size_t index = 0;  // == adjectives.size() for the noun

  friend bool operator==(const TokenRef&, const TokenRef&) = default;
};

// Per-prompt attention readout: token keys plus the category's positional
// features, shared by every map computed for the prompt.
class AttentionModel {
 public:
  AttentionModel(const APTree& w, const World& world, double temperature = kAttentionTemperature);

  const APTree& tree() const { return tree_; }
  std::size_t token_count() const { return refs_.size(); }
  const std::vector<TokenRef>& tokens() const { return refs_; }
  const TokenKey& key(std::size_t flat) const { return keys_.at(flat); }
  double temperature() const { return temperature_; }

  // Flat token index of a phrase token. Throws UnknownToken.
  std::size_t flat_index(TokenRef ref) const;
  std::size_t flat_index(const Token& token) const;
  // Flat indices of all tokens of a phrase, adjectives first.
  std::vector<std::size_t> phrase_tokens(std::size_t ap) const;

  std::vector<Feature> queries(const Latent& z) const;
  AttentionMap map(const Latent& z, std::size_t flat) const;
  std::vector<AttentionMap> maps(const Latent& z) const;

 private:
  APTree tree_;
  double temperature_;
  std::vector<TokenRef> refs_;
  std::vector<TokenKey> keys_;
  std::vector<std::array<double, kNumPartTypes>> membership_;  // per latent pixel
};

// softmax over pixels of (query . key) / (sqrt(d) * temperature).
AttentionMap attention_from_queries(const std::vector<Feature>& queries, const TokenKey& key,
                                    double temperature = kAttentionTemperature);

AttentionMap attention_map(const Latent& z, const Token& token, const APTree& w, const World& world,
                           double temperature = kAttentionTemperature);

// Natural-log Jensen-Shannon divergence. Throws InvalidDistribution.
double js_divergence(const AttentionMap& p, const AttentionMap& q);

// Sum of pairwise JS divergences among one phrase's token maps.
double d_is(const Latent& z, std::size_t ap, const AttentionModel& model);
double d_is_from_maps(const std::vector<AttentionMap>& maps, const AttentionModel& model, std::size_t ap);

double l_bundle(const Latent& z, const AttentionModel& model);
double l_bundle_from_maps(const std::vector<AttentionMap>& maps, const AttentionModel& model);

struct BundleGradient {
  double value = 0.0;
  Latent gradient;
};

// Gradient of L_bundle w.r.t. z. With `injected`, those map values replace the
// model's own maps in the loss and in the softmax Jacobian, while the query
// dependence on z is taken at z.
BundleGradient bundle_gradient(const Latent& z, const AttentionModel& model,
                               const std::vector<AttentionMap>* injected = nullptr);

// z - beta * grad L_bundle. Throws NonFinite.
GuidanceStep bundle_guidance_step(const Latent& z, const AttentionModel& model, double beta,
                                  const std::vector<AttentionMap>* injected = nullptr);

// Pixels at or above the given percentile of the map's entries.
// Throws InvalidPercentile outside (0, 1).
Mask binarize(const AttentionMap& map, double percentile = kDefaultPercentile);

struct BlendedMask {
  Mask relevant;  // OR of every binarized map
  Mask keep;      // complement: held fixed while blending
};

// Throws LengthMismatch.
BlendedMask blended_mask(const std::vector<Mask>& masks_old, const std::vector<Mask>& masks_new);

}  // namespace garmentsynth
