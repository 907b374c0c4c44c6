#include "garmentsynth/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_set>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

namespace {

constexpr std::size_t kLatentSizeFlat = kLatentPixels * kChannels;

void check_finite(const Latent& z, const char* what) {
  if (!z.finite()) throw Error(ErrorCode::kNonFinite, std::string(what) + " produced non-finite values");
}

// Per-part option lists for bank enumeration.
std::vector<std::vector<ScenePart>> part_options(const LayoutTemplate& layout, const Lexicon& lexicon) {
  std::vector<std::vector<ScenePart>> options;
  for (const auto& [id, mask] : layout.parts) {
    std::vector<ScenePart> opts;
    for (const NamedColor& c : lexicon.colors) {
      if (has_length_axis(id)) {
        for (Length len : {Length::kLong, Length::kShort}) opts.push_back({id, c.rgb, len, Pattern::kPlain, false});
      } else {
        opts.push_back({id, c.rgb, Length::kUnset, Pattern::kPlain, false});
      }
    }
    options.push_back(std::move(opts));
  }
  return options;
}

// Floyd's sampling of k distinct values from [0, n), sorted.
std::vector<std::uint64_t> sample_indices(std::uint64_t n, std::uint64_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  for (std::uint64_t j = n - k; j < n; ++j) {
    std::uniform_int_distribution<std::uint64_t> dist(0, j);
    const std::uint64_t v = dist(rng);
    if (!chosen.insert(v).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t category_seed(std::uint64_t seed, const std::string& category) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : category) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return seed ^ h;
}

}  // namespace

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 2) throw Error(ErrorCode::kInvalidConfig, "schedule needs at least 2 steps");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "schedule needs 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps_ = steps;
  s.beta_.assign(steps + 1, 0.0);
  s.alpha_bar_.assign(steps + 1, 1.0);
  for (int t = 1; t <= steps; ++t) {
    s.beta_[t] = beta_start + (beta_end - beta_start) * (t - 1) / (steps - 1);
    s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t]);
  }
  return s;
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps_) throw Error(ErrorCode::kBadTimestep, "beta defined for t in [1, T]");
  return beta_[t];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_) throw Error(ErrorCode::kBadTimestep, "t = " + std::to_string(t) + " outside [0, T]");
  return alpha_bar_[t];
}

Latent forward_diffuse(const Latent& z0, int t, const Latent& eps, const NoiseSchedule& schedule) {
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double s = std::sqrt(1.0 - ab);
  Latent z;
  z.t = t;
  for (std::size_t i = 0; i < z.values.size(); ++i) z.values[i] = a * z0.values[i] + s * eps.values[i];
  return z;
}

Latent gaussian_latent(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Latent z;
  for (double& v : z.values) v = n01(rng);
  return z;
}

void PrototypeBank::add(GarmentScene scene, const Latent& z0, const LayoutTemplate& layout) {
  if (!z0.finite()) throw Error(ErrorCode::kNonFinite, "prototype latent is not finite");
  Prototype p;
  const Image img = decode(z0);
  for (const auto& [id, mask] : layout.parts) p.parts[part_index(id)] = embed_part(img, mask, id);
  by_category_[scene.category].push_back(entries_.size());
  p.scene = std::move(scene);
  entries_.push_back(std::move(p));
  latents_.insert(latents_.end(), z0.values.begin(), z0.values.end());
}

Latent PrototypeBank::latent(std::size_t k) const {
  if (k >= entries_.size()) throw Error(ErrorCode::kEmptyBank, "prototype index out of range");
  Latent z;
  const auto src = z0(k);
  std::copy(src.begin(), src.end(), z.values.begin());
  return z;
}

const std::vector<std::size_t>& PrototypeBank::members(const std::string& category) const {
  static const std::vector<std::size_t> kNone;
  auto it = by_category_.find(category);
  return it == by_category_.end() ? kNone : it->second;
}

PrototypeBank build_prototype_bank(const World& world, const std::vector<std::string>& categories, std::size_t cap,
                                   std::uint64_t seed) {
  PrototypeBank bank;
  for (const std::string& category : categories) {
    const LayoutTemplate& layout = world.templates.at(category);
    const auto options = part_options(layout, world.lexicon);
    std::uint64_t total = 1;
    bool overflow = false;
    for (const auto& o : options) {
      if (o.empty()) {
        total = 0;
        break;
      }
      if (total > std::numeric_limits<std::uint64_t>::max() / o.size()) overflow = true;
      total = overflow ? std::numeric_limits<std::uint64_t>::max() : total * o.size();
    }
    if (total == 0) continue;
    std::vector<std::uint64_t> picks;
    if (total <= cap) {
      picks.resize(total);
      for (std::uint64_t i = 0; i < total; ++i) picks[i] = i;
    } else {
      picks = sample_indices(total, cap, category_seed(seed, category));
    }
    for (std::uint64_t index : picks) {
      GarmentScene scene;
      scene.category = category;
      // Mixed radix, last part fastest.
      std::vector<std::size_t> digits(options.size());
      std::uint64_t rest = index;
      for (std::size_t p = options.size(); p-- > 0;) {
        digits[p] = rest % options[p].size();
        rest /= options[p].size();
      }
      for (std::size_t p = 0; p < options.size(); ++p) scene.parts.push_back(options[p][digits[p]]);
      const Latent z0 = encode(render(scene, world.templates));
      bank.add(std::move(scene), z0, layout);
    }
  }
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "no scenes could be enumerated");
  return bank;
}

PrototypePrior make_prior(const PrototypeBank& bank, const APTree* cond, const World& world, double lambda) {
  if (bank.empty()) throw Error(ErrorCode::kEmptyBank, "prototype bank is empty");
  PrototypePrior prior;
  if (cond == nullptr) {
    prior.members.resize(bank.size());
    for (std::size_t k = 0; k < bank.size(); ++k) prior.members[k] = k;
    prior.log_weight.assign(bank.size(), 0.0);
    return prior;
  }
  prior.members = bank.members(cond->category);
  if (prior.members.empty()) {
    throw Error(ErrorCode::kEmptyBank, "bank has no prototypes for category '" + cond->category + "'");
  }
  std::vector<TextEmbedding> text;
  for (const auto& ap : cond->aps) text.push_back(embed_ap(ap, world.lexicon));
  prior.log_weight.reserve(prior.members.size());
  for (std::size_t k : prior.members) {
    const Prototype& p = bank.entry(k);
    double total = 0.0;
    for (const TextEmbedding& te : text) {
      const auto& v = p.parts[part_index(te.part)];
      if (!v) {
        throw Error(ErrorCode::kInvalidScene,
                    "part '" + std::string(part_name(te.part)) + "' not in '" + cond->category + "' template");
      }
      total += sim(*v, te);
    }
    const double s = text.empty() ? 0.0 : total / static_cast<double>(text.size());
    prior.log_weight.push_back(lambda * s);
  }
  return prior;
}

DenoisePrediction predict_noise(const Latent& z_t, int t, const PrototypePrior& prior, const PrototypeBank& bank,
                                const NoiseSchedule& schedule) {
  if (bank.empty() || prior.members.empty()) throw Error(ErrorCode::kEmptyBank, "prototype bank is empty");
  if (t < 1) throw Error(ErrorCode::kBadTimestep, "noise prediction needs t >= 1");
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double var = 1.0 - ab;
  const std::size_t m = prior.members.size();

  std::vector<double> logw(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto z0 = bank.z0(prior.members[j]);
    double d2 = 0.0;
    for (std::size_t i = 0; i < kLatentSizeFlat; ++i) {
      const double d = z_t.values[i] - a * z0[i];
      d2 += d * d;
    }
    logw[j] = prior.log_weight[j] - d2 / (2.0 * var);
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  if (!std::isfinite(mx)) throw Error(ErrorCode::kNonFinite, "posterior log-weights are not finite");
  double total = 0.0;
  for (double& w : logw) {
    w = std::exp(w - mx);
    total += w;
  }

  DenoisePrediction pred;
  pred.weights.resize(m);
  pred.z0_hat.t = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double w = logw[j] / total;
    pred.weights[j] = w;
    if (w == 0.0) continue;
    const auto z0 = bank.z0(prior.members[j]);
    for (std::size_t i = 0; i < kLatentSizeFlat; ++i) pred.z0_hat.values[i] += w * z0[i];
  }
  const double s = std::sqrt(var);
  pred.eps.t = t;
  for (std::size_t i = 0; i < kLatentSizeFlat; ++i) {
    pred.eps.values[i] = (z_t.values[i] - a * pred.z0_hat.values[i]) / s;
  }
  check_finite(pred.eps, "noise prediction");
  return pred;
}

DenoisePrediction predict_noise(const Latent& z_t, int t, const APTree* cond, const PrototypeBank& bank,
                                const World& world, const NoiseSchedule& schedule, double lambda) {
  return predict_noise(z_t, t, make_prior(bank, cond, world, lambda), bank, schedule);
}

Latent ddim_step(const Latent& /*z_t*/, const DenoisePrediction& pred, int t, const NoiseSchedule& schedule) {
  if (t < 1) throw Error(ErrorCode::kBadTimestep, "ddim_step needs t >= 1");
  const double ab = schedule.alpha_bar(t - 1);
  const double a = std::sqrt(ab);
  const double s = std::sqrt(1.0 - ab);
  Latent z;
  z.t = t - 1;
  for (std::size_t i = 0; i < kLatentSizeFlat; ++i) z.values[i] = a * pred.z0_hat.values[i] + s * pred.eps.values[i];
  check_finite(z, "ddim_step");
  return z;
}

nlohmann::json StepRecord::to_json() const {
  return {{"t", t},
          {"guided", guided},
          {"l_hungarian", l_hungarian},
          {"l_bundle", l_bundle},
          {"consensus_norm", consensus_norm},
          {"bundle_norm", bundle_norm}};
}

nlohmann::json SampleResult::trajectory_json() const {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& r : trajectory) steps.push_back(r.to_json());
  return steps;
}

Sampler::Sampler(const World& world, const PrototypeBank& bank, Config cfg)
    : world_(world), bank_(bank), cfg_(std::move(cfg)), schedule_(NoiseSchedule::from_config(cfg_)) {
  cfg_.validate();
}

PromptState Sampler::prepare(const APTree& tree) const {
  return PromptState{tree, make_prior(bank_, &tree, world_, cfg_.lambda),
                     AttentionModel(tree, world_, cfg_.temperature)};
}

PromptState Sampler::prepare(const std::string& prompt) const { return prepare(parse_prompt(prompt, world_.lexicon)); }

Latent Sampler::initial_noise(std::uint64_t seed) const {
  Latent z = gaussian_latent(seed);
  z.t = cfg_.steps;
  return z;
}

StepOutcome Sampler::step(const Latent& z_t, int t, const PromptState& state, const Injection* injection) const {
  StepOutcome out;
  out.record.t = t;
  out.record.guided = cfg_.in_window(t);

  Latent z_hat = z_t;
  if (out.record.guided && cfg_.alpha > 0.0) {
    GuidanceStep g = consensus_guidance_step(z_t, state.tree, cfg_.alpha, world_);
    out.record.l_hungarian = g.loss_before;
    out.record.consensus_norm = g.step_norm;
    z_hat = std::move(g.latent);
  } else {
    out.record.l_hungarian = l_hungarian(segment(decode(z_t), state.tree.category, world_.templates), state.tree,
                                         world_).value;
  }

  out.bundle_maps = state.attention.maps(z_hat);
  if (injection != nullptr && injection->donor != nullptr) {
    if (injection->source.size() != out.bundle_maps.size()) {
      throw Error(ErrorCode::kLengthMismatch, "injection plan does not match the prompt's token count");
    }
    for (std::size_t k = 0; k < out.bundle_maps.size(); ++k) {
      if (injection->source[k]) out.bundle_maps[k] = injection->donor->at(*injection->source[k]);
    }
  }

  Latent z_prime = z_hat;
  if (out.record.guided && cfg_.beta > 0.0) {
    GuidanceStep g = bundle_guidance_step(z_hat, state.attention, cfg_.beta, &out.bundle_maps);
    out.record.l_bundle = g.loss_before;
    out.record.bundle_norm = g.step_norm;
    z_prime = std::move(g.latent);
  } else {
    out.record.l_bundle = l_bundle_from_maps(out.bundle_maps, state.attention);
  }

  const DenoisePrediction pred = predict_noise(z_prime, t, state.prior, bank_, schedule_);
  out.next = ddim_step(z_prime, pred, t, schedule_);
  return out;
}

SampleResult Sampler::sample(const PromptState& state, std::uint64_t seed, const std::vector<int>& record_steps) const {
  SampleResult result;
  Latent z = initial_noise(seed);
  for (int t = cfg_.steps; t >= 1; --t) {
    if (std::find(record_steps.begin(), record_steps.end(), t) != record_steps.end()) {
      result.attention[t] = state.attention.maps(z);
    }
    StepOutcome o = step(z, t, state);
    result.trajectory.push_back(o.record);
    z = std::move(o.next);
  }
  result.final_latent = z;
  result.image = decode(z).clamped();
  return result;
}

SampleResult Sampler::sample(const std::string& prompt, std::uint64_t seed, const std::vector<int>& record_steps) const {
  return sample(prepare(prompt), seed, record_steps);
}

}  // namespace garmentsynth
