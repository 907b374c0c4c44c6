#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "garmentsynth/error.hpp"
#include "garmentsynth/evalkit.hpp"
#include "garmentsynth/io.hpp"

namespace gs = garmentsynth;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Sampler settings shared by every subcommand: config file, then flags.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "key = value config file (default: $GARMENTSYNTH_CONFIG)");
    const std::vector<std::pair<std::string, std::string>> keys = {
        {"--steps", "steps"},         {"--alpha", "alpha"},           {"--beta", "beta"},
        {"--window-lo", "window_lo"}, {"--window-hi", "window_hi"},   {"--percentile", "percentile"},
        {"--temperature", "temperature"}, {"--lambda", "lambda"},     {"--beta-start", "beta_start"},
        {"--beta-end", "beta_end"},   {"--bank-cap", "bank_cap"},     {"--bank-seed", "bank_seed"},
        {"--lexicon", "lexicon"},     {"--templates", "templates"}};
    for (const auto& [flag, key] : keys) {
      app.add_option_function<std::string>(flag, [this, key = key](const std::string& v) { overrides[key] = v; },
                                           "override config '" + key + "'");
    }
  }

  gs::Config resolve(std::optional<std::uint64_t> seed) const {
    gs::Config cfg;
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv(gs::kConfigEnvVar)) path = env;
    }
    if (!path.empty()) cfg.apply_file(path);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }
};

json report_header(const std::string& command, const gs::Config& cfg) {
  return {{"command", command}, {"config", cfg.to_json()}};
}

void emit(const json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    gs::write_json(path, j);
  }
}

gs::PrototypeBank bank_for(const gs::World& world, const std::vector<std::string>& categories, const gs::Config& cfg) {
  return gs::build_prototype_bank(world, categories, cfg.bank_cap, cfg.bank_seed);
}

// Attention map as a grayscale canvas image, scaled so the peak is white.
gs::Image heatmap(const gs::AttentionMap& map) {
  double peak = 0.0;
  for (double v : map.p) peak = std::max(peak, v);
  gs::Latent z;
  for (std::size_t p = 0; p < gs::kLatentPixels; ++p) {
    const double v = peak > 0.0 ? map.p[p] / peak : 0.0;
    for (int c = 0; c < gs::kChannels; ++c) z.values[3 * p + c] = v;
  }
  return gs::decode(z);
}

json mask_json(const gs::Mask& m) {
  json rows = json::array();
  for (int y = 0; y < m.height(); ++y) {
    std::string row;
    for (int x = 0; x < m.width(); ++x) row += m.at(x, y) ? '1' : '0';
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"garmentsynth: structured garment image synthesis and editing"};
  app.require_subcommand(1);

  ConfigFlags flags;
  std::string prompt, new_prompt, out, report, image_path, suite_path, token;
  std::uint64_t seed = 0;
  int step = -1;
  bool no_blend = false, no_inject = false;

  auto* synth = app.add_subcommand("synth", "sample an image for a prompt");
  synth->add_option("--prompt", prompt, "garment description")->required();
  synth->add_option("--seed", seed, "noise seed")->required();
  synth->add_option("--out", out, "output PNG")->required();
  synth->add_option("--report", report, "trajectory JSON (default: stdout)");
  flags.attach(*synth);

  auto* parse = app.add_subcommand("parse", "print the attribute phrases of a prompt");
  parse->add_option("--prompt", prompt, "garment description")->required();
  parse->add_option("--out", out, "output JSON (default: stdout)");
  flags.attach(*parse);

  auto* match = app.add_subcommand("match", "score an image against a prompt");
  match->add_option("--prompt", prompt, "garment description")->required();
  match->add_option("--image", image_path, "64x64 PNG")->required();
  match->add_option("--out", out, "output JSON (default: stdout)");
  flags.attach(*match);

  auto* attmap = app.add_subcommand("attmap", "attention map of one token at one sampling step");
  attmap->add_option("--prompt", prompt, "garment description")->required();
  attmap->add_option("--seed", seed, "noise seed")->required();
  attmap->add_option("--token", token, "prompt word")->required();
  attmap->add_option("--step", step, "timestep t in [1, T] (default: T)");
  attmap->add_option("--out", out, "heatmap PNG")->required();
  attmap->add_option("--report", report, "map values JSON (default: stdout)");
  flags.attach(*attmap);

  auto* manip = app.add_subcommand("manipulate", "edit a generated image by substituting attributes");
  manip->add_option("--prompt", prompt, "original prompt")->required();
  manip->add_option("--new-prompt", new_prompt, "edited prompt")->required();
  manip->add_option("--seed", seed, "seed of the original run")->required();
  manip->add_option("--out", out, "edited PNG")->required();
  manip->add_option("--original-out", image_path, "also write the original PNG");
  manip->add_option("--report", report, "edit report JSON (default: stdout)");
  manip->add_flag("--no-blend", no_blend, "disable region-consistent blending");
  manip->add_flag("--no-inject", no_inject, "disable attention injection");
  flags.attach(*manip);

  auto* eval = app.add_subcommand("eval", "run a suite under the four guidance ablations");
  eval->add_option("--suite", suite_path, "suite JSON")->required();
  eval->add_option("--out", out, "report JSON")->required();
  flags.attach(*eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  try {
    if (parse->parsed()) {
      const gs::Config cfg = flags.resolve(std::nullopt);
      const gs::World world = gs::load_world(cfg.lexicon_path, cfg.templates_path);
      const gs::APTree tree = gs::parse_prompt(prompt, world.lexicon);
      json j = report_header("parse", cfg);
      j["tree"] = tree.to_json();
      emit(j, out);
    } else if (match->parsed()) {
      const gs::Config cfg = flags.resolve(std::nullopt);
      const gs::World world = gs::load_world(cfg.lexicon_path, cfg.templates_path);
      const gs::APTree tree = gs::parse_prompt(prompt, world.lexicon);
      const gs::Image img = gs::read_png(image_path);
      const gs::HungarianScore score = gs::l_hungarian(gs::segment(img, tree.category, world.templates), tree, world);
      json pairs = json::array();
      for (std::size_t i = 0; i < score.parts.size(); ++i) {
        const std::size_t col = score.assignment.row_to_col[i];
        pairs.push_back({{"part", std::string(gs::part_name(score.parts[i]))},
                         {"ap", col < tree.aps.size() ? json(col) : json(nullptr)},
                         {"similarity", score.assignment.dummy[i] ? 0.0 : score.assignment.similarity[i]}});
      }
      json j = report_header("match", cfg);
      j["tree"] = tree.to_json();
      j["l_hungarian"] = score.value;
      j["sim_full"] = gs::sim_full(img, tree, world);
      j["assignment"] = pairs;
      j["inferred"] = gs::infer_scene(img, tree.category, world).to_json(world.lexicon);
      emit(j, out);
    } else if (synth->parsed() || attmap->parsed()) {
      const gs::Config cfg = flags.resolve(seed);
      const gs::World world = gs::load_world(cfg.lexicon_path, cfg.templates_path);
      const gs::APTree tree = gs::parse_prompt(prompt, world.lexicon);
      const gs::PrototypeBank bank = bank_for(world, {tree.category}, cfg);
      const gs::Sampler sampler(world, bank, cfg);
      const gs::PromptState state = sampler.prepare(tree);
      if (synth->parsed()) {
        const gs::SampleResult res = sampler.sample(state, seed);
        gs::write_png(out, res.image);
        json j = report_header("synth", cfg);
        j["prompt"] = prompt;
        j["tree"] = tree.to_json();
        j["trajectory"] = res.trajectory_json();
        j["l_hungarian"] = gs::l_hungarian(gs::segment(res.image, tree.category, world.templates), tree, world).value;
        j["inferred"] = gs::infer_scene(res.image, tree.category, world).to_json(world.lexicon);
        emit(j, report);
      } else {
        if (step < 0) step = cfg.steps;
        if (step < 1 || step > cfg.steps) {
          throw gs::Error(gs::ErrorCode::kBadTimestep, "--step must lie in [1, " + std::to_string(cfg.steps) + "]");
        }
        // First phrase token with this spelling.
        std::optional<std::size_t> flat;
        const auto words = gs::tokenize(token);
        for (const auto& ap : tree.aps) {
          for (const gs::Token& t : ap.tokens()) {
            if (!flat && words.size() == 1 && t.text == words[0].text) flat = state.attention.flat_index(t);
          }
        }
        if (!flat) throw gs::Error(gs::ErrorCode::kUnknownToken, "'" + token + "' is not a phrase token of the prompt");
        const gs::SampleResult res = sampler.sample(state, seed, {step});
        const gs::AttentionMap& map = res.attention.at(step).at(*flat);
        gs::write_png(out, heatmap(map));
        json j = report_header("attmap", cfg);
        j["prompt"] = prompt;
        j["token"] = token;
        j["step"] = step;
        j["map"] = map.p;
        j["mask"] = mask_json(gs::binarize(map, cfg.percentile));
        emit(j, report);
      }
    } else if (manip->parsed()) {
      const gs::Config cfg = flags.resolve(seed);
      const gs::World world = gs::load_world(cfg.lexicon_path, cfg.templates_path);
      const gs::APTree tree = gs::parse_prompt(prompt, world.lexicon);
      const gs::PrototypeBank bank = bank_for(world, {tree.category}, cfg);
      gs::EditOptions options;
      options.blend = !no_blend;
      options.inject = !no_inject;
      const gs::EditResult res = gs::manipulate({prompt, new_prompt, seed, cfg, std::nullopt}, world, bank, options);
      gs::write_png(out, res.edited);
      if (!image_path.empty()) gs::write_png(image_path, res.original);
      json j = report_header("manipulate", cfg);
      j["prompt"] = prompt;
      j["new_prompt"] = new_prompt;
      j["blend"] = options.blend;
      j["inject"] = options.inject;
      j.update(res.report());
      j["relevant_mask"] = mask_json(res.relevant);
      j["inferred_edited"] = gs::infer_scene(res.edited, tree.category, world).to_json(world.lexicon);
      emit(j, report);
    } else if (eval->parsed()) {
      const gs::Config base = flags.resolve(std::nullopt);
      const json suite_json = gs::read_json(suite_path);
      gs::SuiteSpec spec = gs::SuiteSpec::from_json(suite_json);
      // Suite config sits between the config file and explicit flags.
      gs::Config cfg = base;
      if (suite_json.contains("config")) {
        for (const auto& [k, v] : suite_json.at("config").items()) cfg.set(k, v.is_string() ? v.get<std::string>() : v.dump());
      }
      for (const auto& [k, v] : flags.overrides) cfg.set(k, v);
      cfg.validate();
      spec.cfg = cfg;
      const gs::World world = gs::load_world(cfg.lexicon_path, cfg.templates_path);
      spec.validate(world);
      const auto reports = gs::run_suite(spec, world);
      json j = report_header("eval", cfg);
      j["suite"] = suite_path;
      j["reports"] = json::array();
      for (const auto& r : reports) j["reports"].push_back(r.to_json(world.lexicon));
      gs::write_json(out, j);
    }
  } catch (const gs::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return gs::is_numeric_error(e.code()) ? kExitNumeric : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}
