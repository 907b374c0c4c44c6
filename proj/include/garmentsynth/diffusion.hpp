#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "garmentsynth/alignment.hpp"
#include "garmentsynth/attention.hpp"
#include "garmentsynth/config.hpp"
#include "garmentsynth/latent.hpp"

namespace garmentsynth {

// Linear beta over t = 1..T; index 0 is the clean state with alpha_bar = 1.
class NoiseSchedule {
 public:
  static NoiseSchedule linear(int steps, double beta_start, double beta_end);
  static NoiseSchedule from_config(const Config& cfg) { return linear(cfg.steps, cfg.beta_start, cfg.beta_end); }

  int steps() const { return steps_; }
  // Throws BadTimestep outside [0, T] (beta: [1, T]).
  double beta(int t) const;
  double alpha_bar(int t) const;

 private:
  int steps_ = 0;
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

// z_t = sqrt(ab) z_0 + sqrt(1 - ab) eps. Throws BadTimestep.
Latent forward_diffuse(const Latent& z0, int t, const Latent& eps, const NoiseSchedule& schedule);

// Standard-normal latent from a seeded generator.
Latent gaussian_latent(std::uint64_t seed);

struct Prototype {
  GarmentScene scene;
  std::array<std::optional<ImageEmbedding>, kNumPartTypes> parts;  // embedding of each template part
};

class PrototypeBank {
 public:
  void add(GarmentScene scene, const Latent& z0, const LayoutTemplate& layout);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Prototype& entry(std::size_t k) const { return entries_.at(k); }
  std::span<const double> z0(std::size_t k) const {
    return {latents_.data() + k * kLatentPixels * kChannels, kLatentPixels * kChannels};
  }
  Latent latent(std::size_t k) const;
  // Entry indices of a category; empty when the bank has none.
  const std::vector<std::size_t>& members(const std::string& category) const;

 private:
  std::vector<Prototype> entries_;
  std::vector<double> latents_;
  std::map<std::string, std::vector<std::size_t>> by_category_;
};

// Every scene of each category: one lexicon color per part, and both lengths
// on parts with a length axis. Categories with more than `cap` scenes are
// subsampled with `seed`. Throws UnknownCategory, EmptyBank.
PrototypeBank build_prototype_bank(const World& world, const std::vector<std::string>& categories,
                                   std::size_t cap = 4096, std::uint64_t seed = 0);

// Log prior over bank entries. Unconditioned: uniform over the bank.
// Conditioned: lambda * sim_full over the prompt's category.
struct PrototypePrior {
  std::vector<std::size_t> members;
  std::vector<double> log_weight;
};

PrototypePrior make_prior(const PrototypeBank& bank, const APTree* cond, const World& world,
                          double lambda = 20.0);

struct DenoisePrediction {
  Latent eps;
  Latent z0_hat;
  std::vector<double> weights;  // aligned with the prior's members
};

// Posterior-mean noise prediction. Throws EmptyBank, BadTimestep.
DenoisePrediction predict_noise(const Latent& z_t, int t, const PrototypePrior& prior, const PrototypeBank& bank,
                                const NoiseSchedule& schedule);
DenoisePrediction predict_noise(const Latent& z_t, int t, const APTree* cond, const PrototypeBank& bank,
                                const World& world, const NoiseSchedule& schedule, double lambda = 20.0);

// Deterministic (eta = 0) update. Throws BadTimestep for t < 1.
Latent ddim_step(const Latent& z_t, const DenoisePrediction& pred, int t, const NoiseSchedule& schedule);

struct StepRecord {
  int t = 0;
  bool guided = false;
  double l_hungarian = 0.0;   // at z_t
  double l_bundle = 0.0;      // at the consensus-shifted latent
  double consensus_norm = 0.0;
  double bundle_norm = 0.0;

  nlohmann::json to_json() const;
};

// Per-prompt state shared by every step of a trajectory.
struct PromptState {
  APTree tree;
  PrototypePrior prior;
  AttentionModel attention;
};

// Maps to splice into the bundle step: token k takes donor map source[k], or
// keeps its own map when source[k] is empty.
struct Injection {
  const std::vector<AttentionMap>* donor = nullptr;
  std::vector<std::optional<std::size_t>> source;
};

struct StepOutcome {
  Latent next;
  StepRecord record;
  std::vector<AttentionMap> bundle_maps;  // map values the bundle step used
};

struct SampleResult {
  Image image;  // clamped decode of z_0
  Latent final_latent;
  std::vector<StepRecord> trajectory;
  std::map<int, std::vector<AttentionMap>> attention;  // maps at z_t for recorded steps

  nlohmann::json trajectory_json() const;
};

class Sampler {
 public:
  Sampler(const World& world, const PrototypeBank& bank, Config cfg);

  const Config& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const World& world() const { return world_; }
  const PrototypeBank& bank() const { return bank_; }

  PromptState prepare(const APTree& tree) const;
  PromptState prepare(const std::string& prompt) const;

  Latent initial_noise(std::uint64_t seed) const;

  // One reverse step t -> t-1: consensus shift, bundle shift, DDIM.
  StepOutcome step(const Latent& z_t, int t, const PromptState& state, const Injection* injection = nullptr) const;

  SampleResult sample(const PromptState& state, std::uint64_t seed, const std::vector<int>& record_steps = {}) const;
  SampleResult sample(const std::string& prompt, std::uint64_t seed, const std::vector<int>& record_steps = {}) const;

 private:
  const World& world_;
  const PrototypeBank& bank_;
  Config cfg_;
  NoiseSchedule schedule_;
};

}  // namespace garmentsynth
