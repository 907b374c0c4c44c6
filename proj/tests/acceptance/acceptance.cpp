// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "garmentsynth/evalkit.hpp"
#include "garmentsynth/io.hpp"
#include "oracles.hpp"

namespace gs = garmentsynth;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " (" << detail << ")" << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

const gs::World& world() {
  static const gs::World w = gs::World::builtin();
  return w;
}

const gs::PrototypeBank& full_bank() {
  static const gs::PrototypeBank b = gs::build_prototype_bank(world(), world().templates.categories());
  return b;
}

gs::GarmentScene random_scene(std::mt19937_64& rng) {
  const auto cats = world().templates.categories();
  const auto& cat = cats[std::uniform_int_distribution<std::size_t>(0, cats.size() - 1)(rng)];
  const auto& colors = world().lexicon.colors;
  std::uniform_int_distribution<std::size_t> pick(0, colors.size() - 1);
  gs::GarmentScene s;
  s.category = cat;
  for (const auto& [id, mask] : world().templates.at(cat).parts) {
    gs::ScenePart p{id, colors[pick(rng)].rgb};
    if (gs::has_length_axis(id)) p.length = rng() % 2 ? gs::Length::kLong : gs::Length::kShort;
    s.parts.push_back(p);
  }
  return s;
}

// A prompt naming every part of the scene's category with random words.
gs::APTree random_prompt(std::mt19937_64& rng, const std::string& category) {
  const auto& colors = world().lexicon.colors;
  std::uniform_int_distribution<std::size_t> pick(0, colors.size() - 1);
  std::string text = colors[pick(rng)].name + " " + category;
  bool first = true;
  for (const auto& [id, mask] : world().templates.at(category).parts) {
    if (id == gs::PartId::kBody) continue;
    text += first ? " with " : " and ";
    first = false;
    if (gs::has_length_axis(id) && rng() % 2) text += rng() % 2 ? "short " : "long ";
    text += colors[pick(rng)].name + " " + std::string(gs::part_name(id));
  }
  return gs::parse_prompt(text, world().lexicon);
}

gs::Latent noisy(const gs::Latent& z, std::mt19937_64& rng, double sigma) {
  gs::Latent out = z;
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : out.values) v += n(rng);
  return out;
}

// Matched similarities under a fixed assignment plus the full-image term,
// assembled from the scorer directly.
double consensus_score(const gs::Image& img, const gs::APTree& w, const gs::Assignment& a) {
  const auto& layout = world().templates.at(w.category);
  std::vector<gs::TextEmbedding> text;
  for (const auto& ap : w.aps) text.push_back(gs::embed_ap(ap, world().lexicon));
  std::vector<gs::ImageEmbedding> parts;
  for (const auto& [id, mask] : layout.parts) parts.push_back(gs::embed_part(img, mask, id));
  double total = 0.0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!a.dummy[i]) total += gs::sim(parts[i], text[a.row_to_col[i]]);
  }
  double full = 0.0;
  for (const auto& te : text) {
    for (const auto& v : parts) {
      if (v.part == te.part) full += gs::sim(v, te);
    }
  }
  return total + full / static_cast<double>(text.size());
}

void criterion_1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int mismatches = 0, total = 0;
  for (std::size_t n = 2; n <= 7; ++n) {
    for (int trial = 0; trial < 1000; ++trial) {
      gs::CostMatrix c(n);
      std::vector<std::vector<double>> rows(n, std::vector<double>(n));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) rows[i][j] = c(i, j) = u(rng);
      }
      const gs::Assignment a = gs::hungarian(c);
      const auto ref = oracle::brute_force_assignment(rows);
      if (std::abs(a.total_cost - ref.cost) > 1e-9 * (1.0 + std::abs(ref.cost)) || a.row_to_col != ref.perm) {
        ++mismatches;
      }
      ++total;
    }
  }
  const double secs = seconds_since(start);
  report(1, mismatches == 0 && secs < 5.0, "hungarian matches brute force",
         std::to_string(total) + " matrices, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s");
}

void criterion_2() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  double worst_h = 0.0, worst_b = 0.0;
  int bad_h = 0, bad_b = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const gs::GarmentScene scene = random_scene(rng);
    const gs::APTree w = random_prompt(rng, scene.category);
    const double sigma = std::uniform_real_distribution<double>(0.02, 0.2)(rng);
    const gs::Latent z = noisy(gs::encode(gs::render(scene, world().templates)), rng, sigma);
    const gs::LatentGradient g = gs::hungarian_gradient(z, w, world());
    auto f = [&](const std::vector<double>& x) {
      gs::Latent probe = z;
      probe.values = x;
      return consensus_score(gs::decode(probe), w, g.assignment);
    };
    const double e = oracle::relative_error(g.gradient.values, oracle::central_difference(f, z.values, 1e-4));
    worst_h = std::max(worst_h, e);
    bad_h += e > 1e-4 ? 1 : 0;
  }
  for (int trial = 0; trial < 100; ++trial) {
    const gs::GarmentScene scene = random_scene(rng);
    const gs::APTree w = random_prompt(rng, scene.category);
    const gs::AttentionModel model(w, world());
    const gs::Latent z = noisy(gs::encode(gs::render(scene, world().templates)), rng, 0.3);
    const gs::BundleGradient g = gs::bundle_gradient(z, model);
    auto f = [&](const std::vector<double>& x) {
      gs::Latent probe = z;
      probe.values = x;
      return gs::l_bundle(probe, model);
    };
    const double e = oracle::relative_error(g.gradient.values, oracle::central_difference(f, z.values, 1e-4));
    worst_b = std::max(worst_b, e);
    bad_b += e > 1e-4 ? 1 : 0;
  }
  const double secs = seconds_since(start);
  report(2, bad_h == 0 && bad_b == 0 && secs < 60.0, "analytic gradients match central differences",
         "worst relative error " + fmt(worst_h) + " (consensus), " + fmt(worst_b) + " (bundle), " + fmt(secs) + " s");
}

void criterion_3() {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> n(0.5, 1.0);
  double worst_sum = 0.0, worst_asym = 0.0, worst_self = 0.0;
  bool negative = false, out_of_range = false;
  std::size_t maps = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const gs::GarmentScene scene = random_scene(rng);
    const gs::APTree w = random_prompt(rng, scene.category);
    const gs::AttentionModel model(w, world());
    gs::Latent z;
    for (double& v : z.values) v = n(rng);
    const auto ms = model.maps(z);
    for (const auto& m : ms) {
      double total = 0.0;
      for (double v : m.p) {
        negative |= v < 0.0;
        total += v;
      }
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
      ++maps;
    }
    for (std::size_t a = 0; a + 1 < ms.size(); ++a) {
      const double d = gs::js_divergence(ms[a], ms[a + 1]);
      out_of_range |= d < 0.0 || d > std::log(2.0) + 1e-12;
      worst_asym = std::max(worst_asym, std::abs(d - gs::js_divergence(ms[a + 1], ms[a])));
      worst_self = std::max(worst_self, std::abs(gs::js_divergence(ms[a], ms[a])));
    }
  }
  const bool ok = worst_sum <= 1e-9 && !negative && !out_of_range && worst_asym <= 1e-12 && worst_self <= 1e-12;
  report(3, ok, "attention maps are distributions and JS is a bounded symmetric divergence",
         std::to_string(maps) + " maps, max |sum-1| " + fmt(worst_sum) + ", max asymmetry " + fmt(worst_asym) +
             ", max JS(p,p) " + fmt(worst_self));
}

void criterion_4() {
  const gs::PrototypeBank bank = gs::build_prototype_bank(world(), {"jacket"}, 16, 7);
  const gs::NoiseSchedule s = gs::NoiseSchedule::from_config(gs::Config{});
  const gs::PrototypePrior prior = gs::make_prior(bank, nullptr, world());
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
  std::uniform_int_distribution<int> pick_t(1, s.steps());
  double analytic = 0.0, zero = 0.0;
  std::vector<double> single(bank.size(), 0.0);
  const int samples = 10000;
  for (int k = 0; k < samples; ++k) {
    const gs::Latent z0 = bank.latent(pick(rng));
    const int t = pick_t(rng);
    const gs::Latent eps = gs::gaussian_latent(rng());
    const gs::Latent zt = gs::forward_diffuse(z0, t, eps, s);
    const gs::DenoisePrediction p = gs::predict_noise(zt, t, prior, bank, s);
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    for (std::size_t i = 0; i < eps.values.size(); ++i) {
      analytic += (eps.values[i] - p.eps.values[i]) * (eps.values[i] - p.eps.values[i]);
      zero += eps.values[i] * eps.values[i];
    }
    for (std::size_t j = 0; j < bank.size(); ++j) {
      const auto zj = bank.z0(j);
      double l = 0.0;
      for (std::size_t i = 0; i < eps.values.size(); ++i) {
        const double e = eps.values[i] - (zt.values[i] - a * zj[i]) / b;
        l += e * e;
      }
      single[j] += l;
    }
  }
  analytic /= samples;
  zero /= samples;
  double best_single = std::numeric_limits<double>::infinity();
  for (double& v : single) best_single = std::min(best_single, v / samples);
  const bool ok = analytic <= best_single && analytic <= 0.95 * zero;
  report(4, ok, "analytic denoiser minimizes the Monte-Carlo noise loss",
         "L_DM " + fmt(analytic) + " vs zero " + fmt(zero) + " and best single prototype " + fmt(best_single) +
             " over " + std::to_string(samples) + " draws, bank of " + std::to_string(bank.size()));
}

void criterion_5(const gs::SuiteSpec& suite) {
  gs::Config cfg;
  cfg.alpha = 1e-2;
  cfg.beta = 1e-2;
  const gs::Sampler sampler(world(), full_bank(), cfg);
  int ascent = 0, descent = 0, states = 0;
  // Four mid-trajectory states from each of 50 prompts.
  const std::vector<int> probe_steps{36, 29, 22, 15};
  for (const gs::SynthCase& c : suite.synthesis) {
    const gs::PromptState state = sampler.prepare(c.prompt);
    gs::Latent z = sampler.initial_noise(c.seed);
    for (int t = cfg.steps; t >= probe_steps.back(); --t) {
      if (std::find(probe_steps.begin(), probe_steps.end(), t) != probe_steps.end()) {
        const gs::GuidanceStep g = gs::consensus_guidance_step(z, state.tree, cfg.alpha, world());
        ascent += gs::hungarian_gradient(g.latent, state.tree, world()).value >= g.loss_before - 1e-6 ? 1 : 0;
        const gs::GuidanceStep b = gs::bundle_guidance_step(g.latent, state.attention, cfg.beta);
        descent += gs::l_bundle(b.latent, state.attention) <= b.loss_before + 1e-6 ? 1 : 0;
        ++states;
      }
      z = sampler.step(z, t, state).next;
    }
  }
  const bool ok = states >= 200 && ascent * 100 >= 95 * states && descent * 100 >= 95 * states;
  report(5, ok, "guidance steps are monotone",
         "consensus ascent " + std::to_string(ascent) + "/" + std::to_string(states) + ", bundle descent " +
             std::to_string(descent) + "/" + std::to_string(states));
}

const gs::SuiteReport& by_name(const std::vector<gs::SuiteReport>& rs, const std::string& name) {
  for (const auto& r : rs) {
    if (r.variant == name) return r;
  }
  throw std::runtime_error("missing variant " + name);
}

void criterion_6(const gs::SuiteSpec& suite) {
  const auto start = Clock::now();
  const auto reports = gs::run_suite(suite, world());
  const double secs = seconds_since(start);
  const auto& on = by_name(reports, "both_on");
  const auto& l1 = by_name(reports, "l1_only");
  const auto& l2 = by_name(reports, "l2_only");
  const auto& off = by_name(reports, "both_off");
  const bool rates = *on.leakage_rate <= 0.05 && *on.confusion_rate <= 0.05;
  const bool confusion_order = *on.confusion_rate <= *l1.confusion_rate && *l1.confusion_rate <= *off.confusion_rate;
  const bool leakage_order = *on.leakage_rate <= *l2.leakage_rate && *l2.leakage_rate <= *off.leakage_rate;
  std::string detail;
  for (const auto* r : {&off, &l1, &l2, &on}) {
    detail += r->variant + " leak " + fmt(*r->leakage_rate) + " conf " + fmt(*r->confusion_rate) + "; ";
  }
  report(6, rates && confusion_order && leakage_order && secs < 600.0, "synthesis suite rates and ablation ordering",
         detail + fmt(secs) + " s");
}

void criterion_7(const gs::SuiteSpec& suite) {
  const auto reports = gs::run_suite(suite, world(), {{"both_on", true, true}});
  const auto& r = reports.front();
  bool per_case = true;
  for (const auto& e : r.edits) per_case &= !e.error && e.consistency <= e.consistency_unblended;
  const bool ok = r.realized_rate && *r.realized_rate >= 0.9 && r.mean_consistency &&
                  *r.mean_consistency <= 2.0 / 255.0 && *r.noop_identical_rate == 1.0 &&
                  *r.mean_consistency_unblended > *r.mean_consistency && per_case;
  report(7, ok, "edit suite realization and region consistency",
         "realized " + fmt(*r.realized_rate) + ", consistency " + fmt(r.mean_consistency.value_or(NAN)) +
             " (limit " + fmt(2.0 / 255.0) + "), unblended " + fmt(r.mean_consistency_unblended.value_or(NAN)) +
             ", no-op identical " + fmt(*r.noop_identical_rate) + ", per-case blended <= unblended " +
             (per_case ? "yes" : "no"));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_8(const std::string& cli) {
  const fs::path dir = fs::temp_directory_path() / "garmentsynth_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "suite.json") << R"({"synthesis": [{"prompt": "red jacket with short blue sleeves", "seed": 1},
      {"prompt": "gray hoodie with pink hood", "seed": 2}],
      "edits": [{"old_prompt": "red coat with long yellow sleeves", "new_prompt": "red coat with short yellow sleeves", "seed": 3}]})";
  }
  const std::string q = "\"";
  // Each command writes into a per-run directory named by {run}.
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"parse", "parse --prompt \"Navy blue jacket with red collar.\" --out {run}/parse.json"},
      {"synth", "synth --prompt \"navy blue jacket with red collar\" --seed 7 --out {run}/synth.png --report {run}/synth.json"},
      {"match", "match --prompt \"navy blue jacket with red collar\" --image {dir}/first/synth.png --out {run}/match.json"},
      {"attmap", "attmap --prompt \"navy blue jacket with red collar\" --seed 7 --token collar --step 20 --out {run}/att.png --report {run}/att.json"},
      {"manipulate", "manipulate --prompt \"navy blue jacket with red collar\" --new-prompt \"navy blue jacket with green collar\" --seed 7 --out {run}/edit.png --original-out {run}/orig.png --report {run}/edit.json"},
      {"eval", "eval --suite {dir}/suite.json --out {run}/eval.json"},
  };
  auto expand = [&](std::string s, const fs::path& run) {
    for (auto [key, value] : {std::pair<std::string, std::string>{"{run}", run.string()}, {"{dir}", dir.string()}}) {
      for (std::size_t at; (at = s.find(key)) != std::string::npos;) s.replace(at, key.size(), value);
    }
    return s;
  };
  std::vector<std::string> failed;
  std::size_t files = 0;
  for (const char* name : {"first", "second"}) fs::create_directories(dir / name);
  for (const auto& [name, args] : commands) {
    for (const char* run : {"first", "second"}) {
      const std::string cmd = "env -u GARMENTSYNTH_CONFIG " + q + cli + q + " " + expand(args, dir / run) +
                              " > " + q + (dir / run / (name + ".stdout")).string() + q + " 2>&1";
      if (run_shell(cmd) != 0) failed.push_back(name + std::string(" (exit)"));
    }
  }
  for (const auto& entry : fs::directory_iterator(dir / "first")) {
    const fs::path other = dir / "second" / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) failed.push_back(entry.path().filename().string());
    ++files;
  }
  std::string detail = std::to_string(commands.size()) + " commands, " + std::to_string(files) + " files compared";
  for (const auto& f : failed) detail += ", differs: " + f;
  report(8, failed.empty() && files >= 13, "CLI outputs are byte-identical across runs", detail);
}

void criterion_9(const std::string& data) {
  const nlohmann::json goldens = gs::read_json(data + "/parse_goldens.json");
  int ok = 0, total = 0;
  std::string misses;
  for (const auto& g : goldens) {
    ++total;
    try {
      const gs::APTree t = gs::parse_prompt(g.at("prompt").get<std::string>(), world().lexicon);
      if (t.to_json() == g.at("expected")) {
        ++ok;
        continue;
      }
    } catch (const std::exception&) {
    }
    misses += " '" + g.at("prompt").get<std::string>() + "'";
  }
  report(9, total == 20 && ok == total, "parser golden corpus",
         std::to_string(ok) + "/" + std::to_string(total) + " exact" + (misses.empty() ? "" : ", misses:" + misses));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string data, cli;
  app.add_option("--data", data, "directory with the shipped suites")->required();
  app.add_option("--cli", cli, "path to the command-line tool")->required();
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const gs::SuiteSpec synth = gs::SuiteSpec::from_json(gs::read_json(data + "/synthesis_suite.json"));
  const gs::SuiteSpec edits = gs::SuiteSpec::from_json(gs::read_json(data + "/edit_suite.json"));

  const std::vector<std::function<void()>> criteria = {
      criterion_1,
      criterion_2,
      criterion_3,
      criterion_4,
      [&] { criterion_5(synth); },
      [&] { criterion_6(synth); },
      [&] { criterion_7(edits); },
      [&] { criterion_8(cli); },
      [&] { criterion_9(data); },
  };
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), static_cast<int>(i + 1)) == only.end()) continue;
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), false, "aborted", e.what());
    }
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
