#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "garmentsynth/diffusion.hpp"
#include "garmentsynth/error.hpp"
#include "garmentsynth/evalkit.hpp"
#include "garmentsynth/io.hpp"

using namespace garmentsynth;

namespace {

const World& world() {
  static const World w = World::builtin();
  return w;
}

GarmentScene solid_jacket(const Rgb& c) {
  return {"jacket", {{PartId::kBody, c}, {PartId::kSleeves, c, Length::kLong}, {PartId::kCollar, c}}};
}

PrototypeBank small_bank(const std::vector<Rgb>& colors) {
  PrototypeBank bank;
  const auto& layout = world().templates.at("jacket");
  for (const Rgb& c : colors) {
    GarmentScene s = solid_jacket(c);
    const Latent z0 = encode(render(s, world().templates));
    bank.add(std::move(s), z0, layout);
  }
  return bank;
}

const PrototypeBank& full_bank() {
  static const PrototypeBank bank = build_prototype_bank(world(), world().templates.categories());
  return bank;
}

double squared_norm_diff(const Latent& a, const Latent& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return s;
}

Config unguided() {
  Config c;
  c.alpha = 0.0;
  c.beta = 0.0;
  return c;
}

}  // namespace

TEST_CASE("default schedule sanity") {
  const NoiseSchedule s = NoiseSchedule::from_config(Config{});
  CHECK(s.steps() == 50);
  CHECK(s.alpha_bar(0) >= 0.999);
  for (int t = 1; t <= s.steps(); ++t) {
    CHECK(s.beta(t) > 0.0);
    CHECK(s.beta(t) < 1.0);
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  CHECK(s.alpha_bar(s.steps()) <= 1e-4);
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(50) == doctest::Approx(0.35));
  CHECK_THROWS_AS(s.alpha_bar(51), Error);
  CHECK_THROWS_AS(s.alpha_bar(-1), Error);
  CHECK_THROWS_AS(s.beta(0), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(1, 1e-4, 0.3), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(50, 0.0, 0.3), Error);
  CHECK_THROWS_AS(NoiseSchedule::linear(50, 0.2, 0.1), Error);
}

TEST_CASE("forward_diffuse examples") {
  const NoiseSchedule s = NoiseSchedule::from_config(Config{});
  const Latent z0 = encode(render(solid_jacket({1, 0, 0}), world().templates));
  const Latent eps = gaussian_latent(3);
  const Latent at0 = forward_diffuse(z0, 0, eps, s);
  CHECK(squared_norm_diff(at0, z0) <= 1e-20);
  CHECK(at0.t == 0);

  const Latent atT = forward_diffuse(z0, 50, eps, s);
  CHECK(std::sqrt(squared_norm_diff(atT, eps)) <= 0.02 * eps.norm());
  CHECK(atT.t == 50);

  const Latent zero;
  const Latent mid = forward_diffuse(z0, 20, zero, s);
  for (std::size_t i = 0; i < z0.values.size(); ++i) {
    CHECK(mid.values[i] == doctest::Approx(std::sqrt(s.alpha_bar(20)) * z0.values[i]).epsilon(1e-15));
  }
  CHECK_THROWS_AS(forward_diffuse(z0, 51, eps, s), Error);
  CHECK_THROWS_AS(forward_diffuse(z0, -1, eps, s), Error);
}

TEST_CASE("forward diffusion at T is variance preserving") {
  const NoiseSchedule s = NoiseSchedule::from_config(Config{});
  const PrototypeBank& bank = full_bank();
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  const double a = std::sqrt(s.alpha_bar(s.steps()));
  const double b = std::sqrt(1.0 - s.alpha_bar(s.steps()));
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (int draw = 0; draw < 10000; ++draw) {
    const auto z0 = bank.z0(pick(rng));
    // One entry per draw keeps the samples independent.
    const std::size_t i = draw % z0.size();
    const double v = a * z0[i] + b * n(rng);
    sum += v;
    sq += v * v;
    ++count;
  }
  const double mean = sum / count;
  const double var = sq / count - mean * mean;
  CHECK(std::abs(var - 1.0) <= 0.05);
}

TEST_CASE("gaussian_latent is seeded") {
  CHECK(gaussian_latent(4) == gaussian_latent(4));
  CHECK_FALSE(gaussian_latent(4) == gaussian_latent(5));
}

TEST_CASE("prototype bank enumeration") {
  const PrototypeBank& bank = full_bank();
  // jacket: 8 body x 16 sleeve x 8 collar = 1024 scenes, below the cap.
  CHECK(bank.members("jacket").size() == 1024);
  for (const auto& cat : world().templates.categories()) {
    CHECK(bank.members(cat).size() <= 4096);
    CHECK_FALSE(bank.members(cat).empty());
  }
  CHECK(bank.members("cape").empty());
  for (std::size_t k : {std::size_t{0}, bank.size() / 2, bank.size() - 1}) {
    const Prototype& p = bank.entry(k);
    CHECK(bank.latent(k) == encode(render(p.scene, world().templates)));
  }
  const PrototypeBank again = build_prototype_bank(world(), world().templates.categories());
  REQUIRE(again.size() == bank.size());
  for (std::size_t k = 0; k < bank.size(); k += 97) CHECK(again.entry(k).scene == bank.entry(k).scene);
  CHECK_THROWS_AS(build_prototype_bank(world(), {"cape"}), Error);
  CHECK_THROWS_AS(build_prototype_bank(world(), {}), Error);
}

TEST_CASE("predict_noise on a single-prototype bank returns that prototype") {
  const PrototypeBank bank = small_bank({{0, 0.7, 0}});
  const NoiseSchedule s = NoiseSchedule::from_config(Config{});
  for (int t : {1, 10, 25, 50}) {
    const Latent z = gaussian_latent(static_cast<std::uint64_t>(t));
    const DenoisePrediction p = predict_noise(z, t, nullptr, bank, world(), s);
    CHECK(p.weights.size() == 1);
    CHECK(p.weights[0] == 1.0);
    CHECK(p.z0_hat == bank.latent(0));
  }
  CHECK_THROWS_AS(predict_noise(Latent{}, 0, nullptr, bank, world(), s), Error);
  CHECK_THROWS_AS(predict_noise(Latent{}, 1, nullptr, PrototypeBank{}, world(), s), Error);
}

TEST_CASE("posterior concentrates on the generating prototype") {
  const PrototypeBank bank = small_bank({{1, 0, 0}, {0, 0, 1}, {0, 0.7, 0}, {1, 1, 0}});
  const NoiseSchedule s = NoiseSchedule::from_config(Config{});
  for (std::size_t k = 0; k < bank.size(); ++k) {
    for (int t : {1, 5, 10}) {
      Latent z = bank.latent(k);
      for (double& v : z.values) v *= std::sqrt(s.alpha_bar(t));
      const DenoisePrediction p = predict_noise(z, t, nullptr, bank, world(), s);
      CHECK(p.weights[k] >= 0.99);
    }
  }
}

TEST_CASE("posterior weights form a distribution and the noise identity holds") {
  const PrototypeBank& bank = full_bank();
  const NoiseSchedule s = NoiseSchedule::from_config(Config{});
  const APTree w = parse_prompt("red jacket with short blue sleeves", world().lexicon);
  for (int t : {1, 7, 20, 35, 50}) {
    for (const APTree* cond : {static_cast<const APTree*>(nullptr), &w}) {
      const Latent z = gaussian_latent(100 + static_cast<std::uint64_t>(t));
      const DenoisePrediction p = predict_noise(z, t, cond, bank, world(), s);
      double total = 0.0;
      for (double x : p.weights) {
        CHECK(x >= 0.0);
        total += x;
      }
      CHECK(std::abs(total - 1.0) <= 1e-9);
      const double a = std::sqrt(s.alpha_bar(t));
      const double b = std::sqrt(1.0 - s.alpha_bar(t));
      double worst = 0.0;
      for (std::size_t i = 0; i < z.values.size(); ++i) {
        worst = std::max(worst, std::abs(p.eps.values[i] - (z.values[i] - a * p.z0_hat.values[i]) / b));
      }
      CHECK(worst <= 1e-9);
    }
  }
}

TEST_CASE("conditioned prior favours prototypes matching the prompt") {
  const PrototypeBank& bank = full_bank();
  const APTree w = parse_prompt("red jacket with short blue sleeves and green collar", world().lexicon);
  const PrototypePrior prior = make_prior(bank, &w, world(), 20.0);
  CHECK(prior.members == bank.members("jacket"));
  const auto best = std::max_element(prior.log_weight.begin(), prior.log_weight.end()) - prior.log_weight.begin();
  const GarmentScene& s = bank.entry(prior.members[static_cast<std::size_t>(best)]).scene;
  CHECK(world().lexicon.colors[world().lexicon.nearest_color(s.find(PartId::kBody)->color)].name == "red");
  CHECK(s.find(PartId::kSleeves)->length == Length::kShort);
  CHECK(s.find(PartId::kSleeves)->color == Rgb{0, 0, 1});
  CHECK(s.find(PartId::kCollar)->color == Rgb{0, 0.7, 0});
  const PrototypePrior flat = make_prior(bank, nullptr, world());
  CHECK(flat.members.size() == bank.size());
  const APTree hoodie_belt = parse_prompt("hoodie with belt", world().lexicon);
  CHECK_THROWS_AS(make_prior(bank, &hoodie_belt, world()), Error);
}

TEST_CASE("ddim telescopes to a fixed z0 estimate") {
  const NoiseSchedule s = NoiseSchedule::from_config(Config{});
  DenoisePrediction p;
  p.z0_hat = encode(render(solid_jacket({1, 0.6, 0.8}), world().templates));
  Latent z = gaussian_latent(9);
  for (int t = s.steps(); t >= 1; --t) {
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    p.eps = z;
    for (std::size_t i = 0; i < z.values.size(); ++i) p.eps.values[i] = (z.values[i] - a * p.z0_hat.values[i]) / b;
    z = ddim_step(z, p, t, s);
    CHECK(z.t == t - 1);
  }
  CHECK(squared_norm_diff(z, p.z0_hat) <= 1e-24);
  CHECK_THROWS_AS(ddim_step(z, p, 0, s), Error);
}

TEST_CASE("single-prototype bank samples decode to that prototype") {
  const PrototypeBank bank = small_bank({{0.7, 0, 0.8}});
  const Sampler sampler(world(), bank, unguided());
  const SampleResult r = sampler.sample("purple jacket", 12);
  const Image expected = decode(bank.latent(0));
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.data().size(); ++i) {
    worst = std::max(worst, std::abs(r.image.data()[i] - expected.data()[i]));
  }
  CHECK(worst <= 1e-6);
  CHECK(r.trajectory.size() == 50);
  CHECK(r.trajectory.front().t == 50);
  CHECK(r.trajectory.back().t == 1);
}

TEST_CASE("sampling is deterministic and records the requested steps") {
  const Sampler sampler(world(), full_bank(), Config{});
  const SampleResult a = sampler.sample("navy blue jacket with red collar", 77, {40, 10});
  const SampleResult b = sampler.sample("navy blue jacket with red collar", 77, {40, 10});
  CHECK(a.image == b.image);
  CHECK(a.final_latent == b.final_latent);
  CHECK(a.trajectory_json() == b.trajectory_json());
  CHECK(a.attention.size() == 2);
  CHECK(a.attention.at(40).size() == 5);
  for (const auto& r : a.trajectory) CHECK(r.guided == (r.t >= 10 && r.t <= 40));
  CHECK_FALSE(sampler.sample("navy blue jacket with red collar", 78).image == a.image);
}

TEST_CASE("the best-matching prototype of every suite prompt realizes it") {
  const SuiteSpec spec = SuiteSpec::from_json(read_json(std::string(GARMENTSYNTH_DATA_DIR) + "/synthesis_suite.json"));
  for (const SynthCase& c : spec.synthesis) {
    const APTree tree = parse_prompt(c.prompt, world().lexicon);
    const PrototypePrior prior = make_prior(full_bank(), &tree, world());
    const auto best = std::max_element(prior.log_weight.begin(), prior.log_weight.end()) - prior.log_weight.begin();
    const GarmentScene& scene = full_bank().entry(prior.members[static_cast<std::size_t>(best)]).scene;
    const SynthesisResult r{tree, render(scene, world().templates)};
    CAPTURE(c.prompt);
    CHECK_FALSE(leaks(r, world()));
    CHECK(confused_phrases(r, world()) == 0);
  }
}

// Kept as its own ctest entry: see the README's limitations section.
TEST_CASE("unguided conditioned sampling realizes the prompt on the synthesis suite") {
  const SuiteSpec spec = SuiteSpec::from_json(read_json(std::string(GARMENTSYNTH_DATA_DIR) + "/synthesis_suite.json"));
  REQUIRE(spec.synthesis.size() == 50);
  const Sampler sampler(world(), full_bank(), unguided());
  int matched = 0;
  for (const SynthCase& c : spec.synthesis) {
    const PromptState state = sampler.prepare(c.prompt);
    const SynthesisResult r{state.tree, sampler.sample(state, c.seed).image};
    const bool ok = !leaks(r, world()) && confused_phrases(r, world()) == 0;
    if (!ok) MESSAGE("unmatched: " << c.prompt << " seed " << c.seed);
    matched += ok ? 1 : 0;
  }
  MESSAGE("matched " << matched << " of " << spec.synthesis.size());
  CHECK(matched * 100 >= 95 * static_cast<int>(spec.synthesis.size()));
}

TEST_CASE("default guidance does not lower the final consensus score") {
  const SuiteSpec spec = SuiteSpec::from_json(read_json(std::string(GARMENTSYNTH_DATA_DIR) + "/synthesis_suite.json"));
  const Sampler off(world(), full_bank(), unguided());
  const Sampler on(world(), full_bank(), Config{});
  double diff = 0.0;
  for (const SynthCase& c : spec.synthesis) {
    const PromptState state = on.prepare(c.prompt);
    auto score = [&](const Sampler& s) {
      const Image img = s.sample(state, c.seed).image;
      return l_hungarian(segment(img, state.tree.category, world().templates), state.tree, world()).value;
    };
    diff += score(on) - score(off);
  }
  CHECK(diff / static_cast<double>(spec.synthesis.size()) >= 0.0);
}

TEST_CASE("guidance steps are monotone on mid-trajectory states") {
  const SuiteSpec spec = SuiteSpec::from_json(read_json(std::string(GARMENTSYNTH_DATA_DIR) + "/synthesis_suite.json"));
  Config cfg;
  cfg.alpha = 1e-2;
  cfg.beta = 1e-2;
  const Sampler sampler(world(), full_bank(), cfg);
  int ascent = 0, descent = 0, trials = 0;
  for (std::size_t k = 0; k < 20; ++k) {
    const SynthCase& c = spec.synthesis[k];
    const PromptState state = sampler.prepare(c.prompt);
    Latent z = sampler.initial_noise(c.seed);
    for (int t = cfg.steps; t >= 1 && trials < 20 * static_cast<int>(k + 1); --t) {
      if (cfg.in_window(t) && t % 6 == 0) {
        const GuidanceStep g = consensus_guidance_step(z, state.tree, cfg.alpha, world());
        ascent += hungarian_gradient(g.latent, state.tree, world()).value >= g.loss_before - 1e-6 ? 1 : 0;
        const GuidanceStep b = bundle_guidance_step(g.latent, state.attention, cfg.beta);
        descent += l_bundle(b.latent, state.attention) <= b.loss_before + 1e-6 ? 1 : 0;
        ++trials;
      }
      z = sampler.step(z, t, state).next;
    }
  }
  REQUIRE(trials > 0);
  CHECK(ascent * 100 >= 95 * trials);
  CHECK(descent * 100 >= 95 * trials);
}

TEST_CASE("step validates injection plans") {
  const Sampler sampler(world(), full_bank(), Config{});
  const PromptState state = sampler.prepare("red jacket with blue sleeves");
  const Latent z = sampler.initial_noise(1);
  const std::vector<AttentionMap> donor(4);
  const Injection bad{&donor, {std::nullopt}};
  CHECK_THROWS_AS(sampler.step(z, 30, state, &bad), Error);
  const Injection none{&donor, std::vector<std::optional<std::size_t>>(4)};
  CHECK(sampler.step(z, 30, state, &none).next == sampler.step(z, 30, state).next);
}
