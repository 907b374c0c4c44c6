#include "garmentsynth/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

namespace {

constexpr std::size_t kRgb = 0;
constexpr std::size_t kRgbSq = 3;
constexpr std::size_t kMembership = 4;
constexpr std::size_t kConst = kFeatureDim - 1;

// Strength of the positional term for nouns and non-color adjectives.
constexpr double kPositionGain = 3.0;
// Width, in latent cells, of the soft part membership falloff.
constexpr double kMembershipSigma = 1.0;

double scale(double temperature) { return 1.0 / (std::sqrt(static_cast<double>(kFeatureDim)) * temperature); }

std::array<double, kNumPartTypes> zero_membership() {
  std::array<double, kNumPartTypes> a{};
  a.fill(0.0);
  return a;
}

}  // namespace

AttentionModel::AttentionModel(const APTree& w, const World& world, double temperature)
    : tree_(w), temperature_(temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidConfig, "attention temperature must be positive");
  const LayoutTemplate& layout = world.templates.at(w.category);

  membership_.assign(kLatentPixels, zero_membership());
  for (const auto& [id, canvas_mask] : layout.parts) {
    const Mask cells = latent_mask(canvas_mask);
    const auto inside = cells.indices();
    for (std::size_t p = 0; p < kLatentPixels; ++p) {
      const int px = static_cast<int>(p % kLatentSize);
      const int py = static_cast<int>(p / kLatentSize);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c : inside) {
        const double dx = px - static_cast<int>(c % kLatentSize);
        const double dy = py - static_cast<int>(c / kLatentSize);
        best = std::min(best, dx * dx + dy * dy);
      }
      membership_[p][part_index(id)] = std::exp(-best / (2.0 * kMembershipSigma * kMembershipSigma));
    }
  }

  for (std::size_t a = 0; a < w.aps.size(); ++a) {
    const AttributePhrase& ap = w.aps[a];
    const auto part = world.lexicon.noun_part(ap.noun.text);
    if (!part || !layout.has_part(*part)) {
      throw Error(ErrorCode::kInvalidScene, "phrase noun '" + ap.noun.text + "' has no region in '" + w.category + "'");
    }
    TokenKey positional;
    positional.features[kMembership + part_index(*part)] = kPositionGain;

    for (std::size_t j = 0; j <= ap.adjectives.size(); ++j) {
      refs_.push_back({a, j});
      if (j == ap.adjectives.size()) {
        TokenKey k = positional;
        k.is_noun = true;
        keys_.push_back(k);
        continue;
      }
      const auto it = world.lexicon.attribute_adjectives.find(ap.adjectives[j].text);
      if (it != world.lexicon.attribute_adjectives.end() && it->second.kind == AttributeFeature::Kind::kColor) {
        // (2c, -1, 0, -|c|^2) . (rgb, |rgb|^2, m, 1) = -|rgb - c|^2
        const Rgb& c = world.lexicon.colors.at(it->second.color_index).rgb;
        TokenKey k;
        k.features[kRgb] = 2.0 * c.r;
        k.features[kRgb + 1] = 2.0 * c.g;
        k.features[kRgb + 2] = 2.0 * c.b;
        k.features[kRgbSq] = -1.0;
        k.features[kConst] = -squared_distance(c, Rgb{0.0, 0.0, 0.0});
        k.depends_on_color = true;
        keys_.push_back(k);
      } else {
        // Length and pattern words share their noun's region.
        keys_.push_back(positional);
      }
    }
  }
}

std::size_t AttentionModel::flat_index(TokenRef ref) const {
  for (std::size_t i = 0; i < refs_.size(); ++i) {
    if (refs_[i] == ref) return i;
  }
  throw Error(ErrorCode::kUnknownToken, "token reference outside the prompt");
}

std::size_t AttentionModel::flat_index(const Token& token) const {
  for (std::size_t i = 0; i < refs_.size(); ++i) {
    const AttributePhrase& ap = tree_.aps[refs_[i].ap];
    const Token& t = refs_[i].index == ap.adjectives.size() ? ap.noun : ap.adjectives[refs_[i].index];
    if (t == token) return i;
  }
  throw Error(ErrorCode::kUnknownToken, "token '" + token.text + "' is not part of any attribute phrase");
}

std::vector<std::size_t> AttentionModel::phrase_tokens(std::size_t ap) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < refs_.size(); ++i) {
    if (refs_[i].ap == ap) out.push_back(i);
  }
  return out;
}

std::vector<Feature> AttentionModel::queries(const Latent& z) const {
  // Queries are the pooled decoded image, which for a nearest-neighbour decode is z itself.
  std::vector<Feature> q(kLatentPixels);
  for (std::size_t p = 0; p < kLatentPixels; ++p) {
    const Rgb c = z.pixel(p);
    Feature& f = q[p];
    f.fill(0.0);
    f[kRgb] = c.r;
    f[kRgb + 1] = c.g;
    f[kRgb + 2] = c.b;
    f[kRgbSq] = c.r * c.r + c.g * c.g + c.b * c.b;
    for (int k = 0; k < kNumPartTypes; ++k) f[kMembership + k] = membership_[p][k];
    f[kConst] = 1.0;
  }
  return q;
}

AttentionMap attention_from_queries(const std::vector<Feature>& queries, const TokenKey& key, double temperature) {
  const double s = scale(temperature);
  AttentionMap m;
  m.p.resize(queries.size());
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double dot = 0.0;
    for (std::size_t k = 0; k < kFeatureDim; ++k) dot += queries[i][k] * key.features[k];
    m.p[i] = dot * s;
    max_logit = std::max(max_logit, m.p[i]);
  }
  double total = 0.0;
  for (double& v : m.p) {
    v = std::exp(v - max_logit);
    total += v;
  }
  for (double& v : m.p) v /= total;
  return m;
}

AttentionMap AttentionModel::map(const Latent& z, std::size_t flat) const {
  return attention_from_queries(queries(z), keys_.at(flat), temperature_);
}

std::vector<AttentionMap> AttentionModel::maps(const Latent& z) const {
  const auto q = queries(z);
  std::vector<AttentionMap> out;
  out.reserve(keys_.size());
  for (const auto& k : keys_) out.push_back(attention_from_queries(q, k, temperature_));
  return out;
}

AttentionMap attention_map(const Latent& z, const Token& token, const APTree& w, const World& world,
                           double temperature) {
  const AttentionModel model(w, world, temperature);
  return model.map(z, model.flat_index(token));
}

namespace {

void check_distribution(const AttentionMap& m) {
  double total = 0.0;
  for (double v : m.p) {
    if (!(v >= 0.0)) throw Error(ErrorCode::kInvalidDistribution, "negative or NaN probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) throw Error(ErrorCode::kInvalidDistribution, "probabilities do not sum to 1");
}

double xlogy_ratio(double x, double y) { return x > 0.0 ? x * std::log(x / y) : 0.0; }

}  // namespace

double js_divergence(const AttentionMap& p, const AttentionMap& q) {
  if (p.p.size() != q.p.size()) throw Error(ErrorCode::kInvalidDistribution, "distributions differ in length");
  check_distribution(p);
  check_distribution(q);
  double kl_p = 0.0, kl_q = 0.0;
  for (std::size_t i = 0; i < p.p.size(); ++i) {
    const double m = 0.5 * (p.p[i] + q.p[i]);
    kl_p += xlogy_ratio(p.p[i], m);
    kl_q += xlogy_ratio(q.p[i], m);
  }
  return std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
}

double d_is_from_maps(const std::vector<AttentionMap>& maps, const AttentionModel& model, std::size_t ap) {
  const auto idx = model.phrase_tokens(ap);
  double total = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (std::size_t k = j + 1; k < idx.size(); ++k) total += js_divergence(maps.at(idx[j]), maps.at(idx[k]));
  }
  return total;
}

double d_is(const Latent& z, std::size_t ap, const AttentionModel& model) {
  if (ap >= model.tree().aps.size()) throw Error(ErrorCode::kUnknownToken, "phrase index out of range");
  return d_is_from_maps(model.maps(z), model, ap);
}

double l_bundle_from_maps(const std::vector<AttentionMap>& maps, const AttentionModel& model) {
  double total = 0.0;
  for (std::size_t a = 0; a < model.tree().aps.size(); ++a) total += d_is_from_maps(maps, model, a);
  return total;
}

double l_bundle(const Latent& z, const AttentionModel& model) { return l_bundle_from_maps(model.maps(z), model); }

BundleGradient bundle_gradient(const Latent& z, const AttentionModel& model,
                               const std::vector<AttentionMap>* injected) {
  const std::vector<AttentionMap> own = injected ? std::vector<AttentionMap>{} : model.maps(z);
  const std::vector<AttentionMap>& maps = injected ? *injected : own;
  if (maps.size() != model.token_count()) throw Error(ErrorCode::kLengthMismatch, "one map per token expected");

  BundleGradient out;
  out.value = l_bundle_from_maps(maps, model);
  out.gradient.t = z.t;

  // dL/dP for each token: sum over partners of 0.5 * log(P / M).
  std::vector<std::vector<double>> d_prob(maps.size(), std::vector<double>(kLatentPixels, 0.0));
  for (std::size_t a = 0; a < model.tree().aps.size(); ++a) {
    const auto idx = model.phrase_tokens(a);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      for (std::size_t k = j + 1; k < idx.size(); ++k) {
        const auto& p = maps[idx[j]].p;
        const auto& q = maps[idx[k]].p;
        for (std::size_t i = 0; i < kLatentPixels; ++i) {
          const double m = 0.5 * (p[i] + q[i]);
          if (p[i] > 0.0) d_prob[idx[j]][i] += 0.5 * std::log(p[i] / m);
          if (q[i] > 0.0) d_prob[idx[k]][i] += 0.5 * std::log(q[i] / m);
        }
      }
    }
  }

  const double s = scale(model.temperature());
  for (std::size_t t = 0; t < maps.size(); ++t) {
    const TokenKey& key = model.key(t);
    if (!key.depends_on_color) continue;
    const auto& p = maps[t].p;
    double mean = 0.0;
    for (std::size_t i = 0; i < kLatentPixels; ++i) mean += p[i] * d_prob[t][i];
    // logit_i = s * (2 c . z_i - |z_i|^2 - |c|^2), c = key rgb / 2
    for (std::size_t i = 0; i < kLatentPixels; ++i) {
      const double d_logit = p[i] * (d_prob[t][i] - mean);
      for (int ch = 0; ch < kChannels; ++ch) {
        const double zc = z.values[3 * i + ch];
        out.gradient.values[3 * i + ch] += d_logit * s * (key.features[kRgb + ch] - 2.0 * zc);
      }
    }
  }
  return out;
}

GuidanceStep bundle_guidance_step(const Latent& z, const AttentionModel& model, double beta,
                                  const std::vector<AttentionMap>* injected) {
  GuidanceStep step;
  step.latent = z;
  if (beta == 0.0) {
    step.loss_before = injected ? l_bundle_from_maps(*injected, model) : l_bundle(z, model);
    return step;
  }
  const BundleGradient g = bundle_gradient(z, model, injected);
  step.loss_before = g.value;
  double sq = 0.0;
  for (std::size_t k = 0; k < z.values.size(); ++k) {
    const double d = -beta * g.gradient.values[k];
    step.latent.values[k] += d;
    sq += d * d;
  }
  step.step_norm = std::sqrt(sq);
  if (!step.latent.finite()) throw Error(ErrorCode::kNonFinite, "bundle guidance produced a non-finite latent");
  return step;
}

Mask binarize(const AttentionMap& map, double percentile) {
  if (!(percentile > 0.0 && percentile < 1.0)) {
    throw Error(ErrorCode::kInvalidPercentile, "percentile must lie in (0, 1)");
  }
  std::vector<double> sorted = map.p;
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  const auto rank = std::min(n - 1, static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) - 1e-9)));
  const double threshold = sorted[rank];
  Mask m(kLatentSize, kLatentSize);
  if (m.size() != n) m = Mask(static_cast<int>(n), 1);
  for (std::size_t i = 0; i < n; ++i) m.set(i, map.p[i] >= threshold);
  return m;
}

BlendedMask blended_mask(const std::vector<Mask>& masks_old, const std::vector<Mask>& masks_new) {
  const Mask* shape = !masks_old.empty() ? &masks_old.front() : (!masks_new.empty() ? &masks_new.front() : nullptr);
  Mask relevant = shape ? Mask(shape->width(), shape->height()) : Mask(kLatentSize, kLatentSize);
  for (const auto* list : {&masks_old, &masks_new}) {
    for (const Mask& m : *list) {
      if (m.size() != relevant.size()) throw Error(ErrorCode::kLengthMismatch, "blended masks differ in pixel count");
      relevant = relevant | m;
    }
  }
  return {relevant, ~relevant};
}

}  // namespace garmentsynth
