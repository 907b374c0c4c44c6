#include "garmentsynth/evalkit.hpp"

#include <algorithm>
#include <set>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

using json = nlohmann::json;

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

// What a phrase asks of its part, in the vocabulary infer_scene reports.
struct Expectation {
  PartId part = PartId::kBody;
  std::vector<Rgb> colors;  // any of these counts as realized
  std::optional<Length> length;
  std::optional<Pattern> pattern;
};

Expectation expect(const AttributePhrase& ap, const Lexicon& lexicon) {
  Expectation e;
  e.part = lexicon.noun_part(ap.noun.text).value_or(PartId::kBody);
  Rgb sum{};
  int n = 0;
  for (const Token& adj : ap.adjectives) {
    auto it = lexicon.attribute_adjectives.find(adj.text);
    if (it == lexicon.attribute_adjectives.end()) continue;
    const AttributeFeature& f = it->second;
    switch (f.kind) {
      case AttributeFeature::Kind::kColor: {
        const Rgb& c = lexicon.colors.at(f.color_index).rgb;
        sum = {sum.r + c.r, sum.g + c.g, sum.b + c.b};
        e.colors.push_back(c);
        ++n;
        break;
      }
      case AttributeFeature::Kind::kLength:
        if (has_length_axis(e.part)) e.length = f.length;
        break;
      case AttributeFeature::Kind::kPattern:
        e.pattern = f.pattern;
        break;
    }
  }
  // A blend such as "navy blue" may snap to either word's color or to their mean.
  if (n > 1) e.colors.push_back(lexicon.colors.at(lexicon.nearest_color({sum.r / n, sum.g / n, sum.b / n})).rgb);
  return e;
}

bool matches(const Expectation& e, const GarmentScene& inferred) {
  const ScenePart* p = inferred.find(e.part);
  if (p == nullptr || p->absent) return false;
  if (!e.colors.empty() && std::find(e.colors.begin(), e.colors.end(), p->color) == e.colors.end()) return false;
  if (e.length && p->length != *e.length) return false;
  if (e.pattern && p->pattern != *e.pattern) return false;
  return true;
}

Config variant_config(const Config& base, const Variant& v) {
  Config c = base;
  if (!v.consensus) c.alpha = 0.0;
  if (!v.bundle) c.beta = 0.0;
  return c;
}

json synth_case_json(const SynthCaseReport& r, const Lexicon& lexicon) {
  json j = {{"prompt", r.prompt}, {"seed", r.seed}, {"error", optional_json(r.error)}};
  if (!r.error) {
    j["leaked"] = r.leaked;
    j["phrases"] = r.phrases;
    j["confused"] = r.confused;
    j["l_hungarian"] = r.l_hungarian;
    j["inferred"] = r.inferred.to_json(lexicon);
  }
  return j;
}

SynthCaseReport synth_case_from(const json& j) {
  SynthCaseReport r;
  r.prompt = j.at("prompt").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.error = optional_from<std::string>(j, "error");
  if (!r.error) {
    r.leaked = j.at("leaked").get<bool>();
    r.phrases = j.at("phrases").get<std::size_t>();
    r.confused = j.at("confused").get<std::size_t>();
    r.l_hungarian = j.at("l_hungarian").get<double>();
    r.inferred = GarmentScene::from_json(j.at("inferred"));
  }
  return r;
}

json edit_case_json(const EditCaseReport& r) {
  json j = {{"old_prompt", r.old_prompt},
            {"new_prompt", r.new_prompt},
            {"seed", r.seed},
            {"error", optional_json(r.error)}};
  if (!r.error) {
    j["realized"] = r.realized;
    j["consistency"] = r.consistency;
    j["consistency_unblended"] = r.consistency_unblended;
    j["noop_identical"] = r.noop_identical;
    j["keep_pixels"] = r.keep_pixels;
  }
  return j;
}

EditCaseReport edit_case_from(const json& j) {
  EditCaseReport r;
  r.old_prompt = j.at("old_prompt").get<std::string>();
  r.new_prompt = j.at("new_prompt").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.error = optional_from<std::string>(j, "error");
  if (!r.error) {
    r.realized = j.at("realized").get<bool>();
    r.consistency = j.at("consistency").get<double>();
    r.consistency_unblended = j.at("consistency_unblended").get<double>();
    r.noop_identical = j.at("noop_identical").get<bool>();
    r.keep_pixels = j.at("keep_pixels").get<std::size_t>();
  }
  return r;
}

SynthCaseReport run_synth_case(const SynthCase& c, const Sampler& sampler, const World& world) {
  SynthCaseReport r;
  r.prompt = c.prompt;
  r.seed = c.seed;
  try {
    const PromptState state = sampler.prepare(c.prompt);
    const SampleResult s = sampler.sample(state, c.seed);
    const SynthesisResult res{state.tree, s.image};
    r.inferred = infer_scene(s.image, state.tree.category, world);
    r.leaked = leaks(res, world);
    r.phrases = state.tree.aps.size();
    r.confused = confused_phrases(res, world);
    r.l_hungarian = l_hungarian(segment(s.image, state.tree.category, world.templates), state.tree, world).value;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

EditCaseReport run_edit_case(const EditCase& c, const Config& cfg, const World& world, const PrototypeBank& bank) {
  EditCaseReport r;
  r.old_prompt = c.old_prompt;
  r.new_prompt = c.new_prompt;
  r.seed = c.seed;
  try {
    const EditRequest req{c.old_prompt, c.new_prompt, c.seed, cfg, cfg};
    const EditResult blended = manipulate(req, world, bank);
    EditOptions no_blend;
    no_blend.blend = false;
    const EditResult unblended = manipulate(req, world, bank, no_blend);
    const EditResult noop = manipulate({c.old_prompt, c.old_prompt, c.seed, cfg, cfg}, world, bank);

    const APTree new_tree = parse_prompt(c.new_prompt, world.lexicon);
    r.realized = confused_phrases({new_tree, blended.edited}, world, &blended.edited_aps) == 0;
    r.consistency = consistency_score(blended.original, blended.edited, blended.keep);
    r.consistency_unblended = consistency_score(unblended.original, unblended.edited, blended.keep);
    r.noop_identical = noop.edited == noop.original && noop.original == blended.original;
    r.keep_pixels = blended.keep.count();
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

}  // namespace

void SuiteSpec::validate(const World& world) const {
  cfg.validate();
  std::set<std::uint64_t> seeds;
  for (const auto& c : synthesis) {
    parse_prompt(c.prompt, world.lexicon);
    if (!seeds.insert(c.seed).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate synthesis seed " + std::to_string(c.seed));
    }
  }
  seeds.clear();
  for (const auto& c : edits) {
    diff_aps(parse_prompt(c.old_prompt, world.lexicon), parse_prompt(c.new_prompt, world.lexicon));
    if (!seeds.insert(c.seed).second) {
      throw Error(ErrorCode::kInvalidConfig, "duplicate edit seed " + std::to_string(c.seed));
    }
  }
}

std::vector<std::string> SuiteSpec::categories(const World& world) const {
  std::set<std::string> cats;
  auto add = [&](const std::string& prompt) {
    try {
      const APTree t = parse_prompt(prompt, world.lexicon);
      if (world.templates.contains(t.category)) cats.insert(t.category);
    } catch (const Error&) {
      // reported per case
    }
  };
  for (const auto& c : synthesis) add(c.prompt);
  for (const auto& c : edits) {
    add(c.old_prompt);
    add(c.new_prompt);
  }
  return {cats.begin(), cats.end()};
}

SuiteSpec SuiteSpec::from_json(const json& j) {
  SuiteSpec s;
  try {
    if (j.contains("config")) {
      for (const auto& [k, v] : j.at("config").items()) s.cfg.set(k, v.is_string() ? v.get<std::string>() : v.dump());
    }
    for (const auto& c : j.value("synthesis", json::array())) {
      s.synthesis.push_back({c.at("prompt").get<std::string>(), c.at("seed").get<std::uint64_t>()});
    }
    for (const auto& c : j.value("edits", json::array())) {
      s.edits.push_back({c.at("old_prompt").get<std::string>(), c.at("new_prompt").get<std::string>(),
                         c.at("seed").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("suite: ") + e.what());
  }
  return s;
}

json SuiteSpec::to_json() const {
  json synth = json::array();
  for (const auto& c : synthesis) synth.push_back({{"prompt", c.prompt}, {"seed", c.seed}});
  json ed = json::array();
  for (const auto& c : edits) ed.push_back({{"old_prompt", c.old_prompt}, {"new_prompt", c.new_prompt}, {"seed", c.seed}});
  return {{"config", cfg.to_json()}, {"synthesis", synth}, {"edits", ed}};
}

bool leaks(const SynthesisResult& r, const World& world) {
  const GarmentScene inferred = infer_scene(r.image, r.tree.category, world);
  for (const auto& ap : r.tree.aps) {
    const ScenePart* p = inferred.find(world.lexicon.noun_part(ap.noun.text).value_or(PartId::kBody));
    if (p == nullptr || p->absent) return true;
  }
  return false;
}

std::size_t confused_phrases(const SynthesisResult& r, const World& world, const std::vector<std::size_t>* only) {
  const GarmentScene inferred = infer_scene(r.image, r.tree.category, world);
  std::size_t confused = 0;
  for (std::size_t a = 0; a < r.tree.aps.size(); ++a) {
    if (only != nullptr && std::find(only->begin(), only->end(), a) == only->end()) continue;
    if (!matches(expect(r.tree.aps[a], world.lexicon), inferred)) ++confused;
  }
  return confused;
}

double part_leakage_rate(const std::vector<SynthesisResult>& results, const World& world) {
  if (results.empty()) return 0.0;
  std::size_t leaked = 0;
  for (const auto& r : results) leaked += leaks(r, world) ? 1 : 0;
  return static_cast<double>(leaked) / static_cast<double>(results.size());
}

double attribute_confusion_rate(const std::vector<SynthesisResult>& results, const World& world) {
  std::size_t pairs = 0;
  std::size_t confused = 0;
  for (const auto& r : results) {
    pairs += r.tree.aps.size();
    confused += confused_phrases(r, world);
  }
  return pairs == 0 ? 0.0 : static_cast<double>(confused) / static_cast<double>(pairs);
}

std::vector<Variant> ablation_variants() {
  return {{"both_off", false, false}, {"l1_only", true, false}, {"l2_only", false, true}, {"both_on", true, true}};
}

json SuiteReport::to_json(const Lexicon& lexicon) const {
  json synth = json::array();
  for (const auto& c : synthesis) synth.push_back(synth_case_json(c, lexicon));
  json ed = json::array();
  for (const auto& c : edits) ed.push_back(edit_case_json(c));
  return {{"variant", variant},
          {"config", cfg.to_json()},
          {"leakage_rate", optional_json(leakage_rate)},
          {"confusion_rate", optional_json(confusion_rate)},
          {"mean_consistency", optional_json(mean_consistency)},
          {"mean_consistency_unblended", optional_json(mean_consistency_unblended)},
          {"realized_rate", optional_json(realized_rate)},
          {"noop_identical_rate", optional_json(noop_identical_rate)},
          {"synthesis", synth},
          {"edits", ed}};
}

SuiteReport SuiteReport::from_json(const json& j) {
  SuiteReport r;
  try {
    r.variant = j.at("variant").get<std::string>();
    r.cfg = Config::from_json(j.at("config"));
    r.leakage_rate = optional_from<double>(j, "leakage_rate");
    r.confusion_rate = optional_from<double>(j, "confusion_rate");
    r.mean_consistency = optional_from<double>(j, "mean_consistency");
    r.mean_consistency_unblended = optional_from<double>(j, "mean_consistency_unblended");
    r.realized_rate = optional_from<double>(j, "realized_rate");
    r.noop_identical_rate = optional_from<double>(j, "noop_identical_rate");
    for (const auto& c : j.at("synthesis")) r.synthesis.push_back(synth_case_from(c));
    for (const auto& c : j.at("edits")) r.edits.push_back(edit_case_from(c));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("report: ") + e.what());
  }
  return r;
}

std::vector<SuiteReport> run_suite(const SuiteSpec& spec, const World& world, const std::vector<Variant>& variants) {
  spec.cfg.validate();
  std::vector<SuiteReport> reports;
  const auto cats = spec.categories(world);
  std::optional<PrototypeBank> bank;
  if (!cats.empty()) bank = build_prototype_bank(world, cats, spec.cfg.bank_cap, spec.cfg.bank_seed);

  for (const Variant& v : variants) {
    SuiteReport rep;
    rep.variant = v.name;
    rep.cfg = variant_config(spec.cfg, v);

    if (!spec.synthesis.empty()) {
      // Errored cases count as leaked, and as one confused pair when unparsed.
      std::size_t leaked = 0, pairs = 0, confused = 0;
      for (const auto& c : spec.synthesis) {
        SynthCaseReport cr;
        if (bank) {
          cr = run_synth_case(c, Sampler(world, *bank, rep.cfg), world);
        } else {
          cr = {c.prompt, c.seed, std::string("no parsable prompt in the suite")};
        }
        if (cr.error) {
          ++leaked;
          ++pairs;
          ++confused;
        } else {
          leaked += cr.leaked ? 1 : 0;
          pairs += cr.phrases;
          confused += cr.confused;
        }
        rep.synthesis.push_back(std::move(cr));
      }
      rep.leakage_rate = static_cast<double>(leaked) / static_cast<double>(spec.synthesis.size());
      rep.confusion_rate = pairs == 0 ? 0.0 : static_cast<double>(confused) / static_cast<double>(pairs);
    }

    if (!spec.edits.empty()) {
      double cons = 0.0, cons_unblended = 0.0;
      std::size_t ok = 0, realized = 0, identical = 0;
      for (const auto& c : spec.edits) {
        EditCaseReport er;
        if (bank) {
          er = run_edit_case(c, rep.cfg, world, *bank);
        } else {
          er.old_prompt = c.old_prompt;
          er.new_prompt = c.new_prompt;
          er.seed = c.seed;
          er.error = "no parsable prompt in the suite";
        }
        if (!er.error) {
          ++ok;
          cons += er.consistency;
          cons_unblended += er.consistency_unblended;
          realized += er.realized ? 1 : 0;
          identical += er.noop_identical ? 1 : 0;
        }
        rep.edits.push_back(std::move(er));
      }
      const double n = static_cast<double>(spec.edits.size());
      rep.realized_rate = realized / n;
      rep.noop_identical_rate = identical / n;
      if (ok > 0) {
        rep.mean_consistency = cons / static_cast<double>(ok);
        rep.mean_consistency_unblended = cons_unblended / static_cast<double>(ok);
      }
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace garmentsynth
