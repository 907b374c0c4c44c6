#include "garmentsynth/garment_world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

using nlohmann::json;

namespace {

constexpr double kStripeShade = 0.7;
constexpr int kStripeHeight = 4;
constexpr std::size_t kMinPartPixels = 16;

bool is_stripe_row(int y) { return (y / kStripeHeight) % 2 == 1; }

// Rectangle given in latent cells, inclusive bounds.
struct CellRect {
  int x0, y0, x1, y1;
};

Mask cells_to_mask(std::initializer_list<CellRect> rects) {
  Mask m(kCanvasSize, kCanvasSize);
  for (const auto& r : rects) {
    for (int y = r.y0 * kPoolFactor; y < (r.y1 + 1) * kPoolFactor; ++y) {
      for (int x = r.x0 * kPoolFactor; x < (r.x1 + 1) * kPoolFactor; ++x) m.set(x, y, true);
    }
  }
  return m;
}

Mask builtin_part_mask(PartId part) {
  switch (part) {
    case PartId::kBody: return cells_to_mask({{5, 4, 10, 13}});
    case PartId::kSleeves: return cells_to_mask({{2, 4, 4, 11}, {11, 4, 13, 11}});
    case PartId::kCollar: return cells_to_mask({{6, 2, 9, 3}});
    case PartId::kHood: return cells_to_mask({{6, 0, 9, 2}});
    case PartId::kPockets: return cells_to_mask({{6, 9, 6, 10}, {9, 9, 9, 10}});
    case PartId::kButtons: return cells_to_mask({{7, 5, 8, 8}});
    case PartId::kBelt: return cells_to_mask({{5, 11, 10, 11}});
  }
  return Mask(kCanvasSize, kCanvasSize);
}

LayoutTemplate make_builtin(const std::string& category, std::vector<PartId> parts) {
  std::sort(parts.begin(), parts.end());
  LayoutTemplate t;
  t.category = category;
  Mask others(kCanvasSize, kCanvasSize);
  for (PartId p : parts) {
    if (p != PartId::kBody) others = others | builtin_part_mask(p);
  }
  for (PartId p : parts) {
    Mask m = builtin_part_mask(p);
    if (p == PartId::kBody) m = m & ~others;  // body is whatever the trims leave
    t.parts.emplace_back(p, std::move(m));
  }
  return t;
}

}  // namespace

bool LayoutTemplate::has_part(PartId part) const {
  return std::any_of(parts.begin(), parts.end(), [&](const auto& p) { return p.first == part; });
}

const Mask& LayoutTemplate::mask(PartId part) const {
  for (const auto& [id, m] : parts) {
    if (id == part) return m;
  }
  throw Error(ErrorCode::kInvalidScene,
              "category '" + category + "' has no part '" + std::string(part_name(part)) + "'");
}

Mask LayoutTemplate::background() const {
  Mask fg(kCanvasSize, kCanvasSize);
  for (const auto& [id, m] : parts) fg = fg | m;
  return ~fg;
}

bool has_length_axis(PartId part) { return part == PartId::kSleeves; }

Mask shortened(const Mask& mask) {
  int y_min = mask.height();
  int y_max = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y)) {
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
      }
    }
  }
  Mask out = mask;
  if (y_max < 0) return out;
  const int cut = y_min + (y_max - y_min + 1) / 2;
  for (int y = cut; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.set(x, y, false);
  }
  return out;
}

TemplateSet TemplateSet::builtin() {
  using P = PartId;
  TemplateSet set;
  set.add(make_builtin("jacket", {P::kBody, P::kSleeves, P::kCollar}));
  set.add(make_builtin("sweater", {P::kBody, P::kSleeves, P::kHood}));
  set.add(make_builtin("shirt", {P::kBody, P::kSleeves, P::kButtons}));
  set.add(make_builtin("dress", {P::kBody, P::kBelt, P::kPockets}));
  set.add(make_builtin("coat", {P::kBody, P::kSleeves, P::kCollar, P::kBelt}));
  set.add(make_builtin("hoodie", {P::kBody, P::kHood, P::kPockets}));
  return set;
}

void TemplateSet::add(LayoutTemplate t) {
  std::sort(t.parts.begin(), t.parts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  templates_[t.category] = std::move(t);
}

const LayoutTemplate& TemplateSet::at(const std::string& category) const {
  auto it = templates_.find(category);
  if (it == templates_.end()) throw Error(ErrorCode::kUnknownCategory, "no layout template for '" + category + "'");
  return it->second;
}

std::vector<std::string> TemplateSet::categories() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : templates_) out.push_back(name);
  return out;
}

void TemplateSet::validate() const {
  for (const auto& [name, t] : templates_) {
    if (t.parts.empty()) throw Error(ErrorCode::kInvalidTemplate, name + " has no parts");
    if (!t.has_part(PartId::kBody)) throw Error(ErrorCode::kInvalidTemplate, name + " has no body");
    for (std::size_t i = 0; i < t.parts.size(); ++i) {
      const Mask& m = t.parts[i].second;
      if (m.width() != kCanvasSize || m.height() != kCanvasSize) {
        throw Error(ErrorCode::kInvalidTemplate, name + " mask is not canvas-sized");
      }
      if (m.count() < kMinPartPixels) {
        throw Error(ErrorCode::kInvalidTemplate,
                    name + "/" + std::string(part_name(t.parts[i].first)) + " has fewer than 16 pixels");
      }
      if (i > 0 && t.parts[i - 1].first == t.parts[i].first) {
        throw Error(ErrorCode::kInvalidTemplate, name + " lists a part twice");
      }
      for (std::size_t j = i + 1; j < t.parts.size(); ++j) {
        if (m.intersects(t.parts[j].second)) {
          throw Error(ErrorCode::kInvalidTemplate, name + " has overlapping part masks");
        }
      }
    }
  }
}

std::vector<int> encode_rle(const Mask& mask) {
  std::vector<int> counts;
  bool current = false;
  int run = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != current) {
      counts.push_back(run);
      run = 0;
      current = !current;
    }
    ++run;
  }
  counts.push_back(run);
  return counts;
}

Mask decode_rle(const std::vector<int>& counts, int width, int height) {
  Mask m(width, height);
  std::size_t pos = 0;
  bool value = false;
  for (int c : counts) {
    if (c < 0 || pos + static_cast<std::size_t>(c) > m.size()) {
      throw Error(ErrorCode::kInvalidTemplate, "run lengths overflow the canvas");
    }
    for (int k = 0; k < c; ++k) m.set(pos++, value);
    value = !value;
  }
  if (pos != m.size()) throw Error(ErrorCode::kInvalidTemplate, "run lengths do not cover the canvas");
  return m;
}

json TemplateSet::to_json() const {
  json j = json::object();
  for (const auto& [name, t] : templates_) {
    json parts = json::object();
    for (const auto& [id, m] : t.parts) parts[std::string(part_name(id))] = encode_rle(m);
    j[name] = parts;
  }
  return j;
}

TemplateSet TemplateSet::from_json(const json& j) {
  TemplateSet set;
  try {
    for (const auto& [name, parts] : j.items()) {
      LayoutTemplate t;
      t.category = name;
      for (const auto& [part, counts] : parts.items()) {
        auto id = part_from_name(part);
        if (!id) throw Error(ErrorCode::kInvalidTemplate, "unknown part '" + part + "'");
        t.parts.emplace_back(*id, decode_rle(counts.get<std::vector<int>>(), kCanvasSize, kCanvasSize));
      }
      set.add(std::move(t));
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kInvalidTemplate, e.what());
  }
  set.validate();
  return set;
}

World World::builtin() { return {Lexicon::builtin(), TemplateSet::builtin()}; }

const ScenePart* GarmentScene::find(PartId part) const {
  for (const auto& p : parts) {
    if (p.part == part) return &p;
  }
  return nullptr;
}

json GarmentScene::to_json(const Lexicon& lexicon) const {
  json parts_json = json::array();
  for (const auto& p : parts) {
    json pj = {{"part", std::string(part_name(p.part))}, {"absent", p.absent}};
    if (!p.absent) {
      const int idx = lexicon.nearest_color(p.color);
      pj["rgb"] = {p.color.r, p.color.g, p.color.b};
      if (idx >= 0) pj["color"] = lexicon.colors[idx].name;
      pj["length"] = std::string(length_name(p.length));
      pj["pattern"] = std::string(pattern_name(p.pattern));
    }
    parts_json.push_back(pj);
  }
  return {{"category", category}, {"parts", parts_json}};
}

GarmentScene GarmentScene::from_json(const json& j) {
  GarmentScene scene;
  try {
    scene.category = j.at("category").get<std::string>();
    for (const auto& pj : j.at("parts")) {
      ScenePart p;
      const auto id = part_from_name(pj.at("part").get<std::string>());
      if (!id) throw Error(ErrorCode::kInvalidScene, "unknown part '" + pj.at("part").get<std::string>() + "'");
      p.part = *id;
      p.absent = pj.at("absent").get<bool>();
      if (p.absent) {
        p.color = kWhite;
        p.pattern = Pattern::kUnset;
      } else {
        const auto& rgb = pj.at("rgb");
        p.color = {rgb.at(0).get<double>(), rgb.at(1).get<double>(), rgb.at(2).get<double>()};
        p.length = length_from_name(pj.at("length").get<std::string>()).value_or(Length::kUnset);
        p.pattern = pattern_from_name(pj.at("pattern").get<std::string>()).value_or(Pattern::kUnset);
      }
      scene.parts.push_back(p);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidScene, e.what());
  }
  return scene;
}

Image render(const GarmentScene& scene, const TemplateSet& templates) {
  const LayoutTemplate* layout = nullptr;
  try {
    layout = &templates.at(scene.category);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidScene, e.what());
  }
  if (scene.parts.empty()) throw Error(ErrorCode::kInvalidScene, "scene has no parts");
  std::set<PartId> seen;
  Image img(kCanvasSize, kCanvasSize, kWhite);
  for (const ScenePart& p : scene.parts) {
    if (!seen.insert(p.part).second) throw Error(ErrorCode::kInvalidScene, "duplicate part id");
    if (!layout->has_part(p.part)) {
      throw Error(ErrorCode::kInvalidScene, "part '" + std::string(part_name(p.part)) + "' not in '" +
                                                scene.category + "' template");
    }
    if (p.absent) continue;
    if (!in_unit_range(p.color)) throw Error(ErrorCode::kInvalidScene, "color outside [0,1]");
    if (p.length != Length::kUnset && !has_length_axis(p.part)) {
      throw Error(ErrorCode::kInvalidScene, "length given for a part without a length axis");
    }
    const Mask region = p.length == Length::kShort ? shortened(layout->mask(p.part)) : layout->mask(p.part);
    const Rgb dark{p.color.r * kStripeShade, p.color.g * kStripeShade, p.color.b * kStripeShade};
    for (int y = 0; y < kCanvasSize; ++y) {
      const bool striped_row = p.pattern == Pattern::kStriped && is_stripe_row(y);
      for (int x = 0; x < kCanvasSize; ++x) {
        if (region.at(x, y)) img.set_pixel(static_cast<std::size_t>(y) * kCanvasSize + x, striped_row ? dark : p.color);
      }
    }
  }
  return img;
}

PartSet segment(const Image& image, const std::string& category, const TemplateSet& templates) {
  const LayoutTemplate& layout = templates.at(category);
  if (image.width() != kCanvasSize || image.height() != kCanvasSize) {
    throw Error(ErrorCode::kBadShape, "segment expects a 64x64 image");
  }
  PartSet set;
  set.full_image = image;
  for (const auto& [id, m] : layout.parts) {
    Image part(kCanvasSize, kCanvasSize, kWhite);
    for (std::size_t i : m.indices()) part.set_pixel(i, image.pixel(i));
    set.parts.push_back({id, std::move(part), m});
  }
  return set;
}

GarmentScene infer_scene(const Image& image, const std::string& category, const World& world) {
  const LayoutTemplate& layout = world.templates.at(category);
  if (image.width() != kCanvasSize || image.height() != kCanvasSize) {
    throw Error(ErrorCode::kBadShape, "infer_scene expects a 64x64 image");
  }
  // Slack so a region placed exactly at the threshold is not pushed out by rounding.
  const double eps2 = kBackgroundEpsilon * kBackgroundEpsilon + 1e-12;
  GarmentScene scene;
  scene.category = category;
  for (const auto& [id, m] : layout.parts) {
    ScenePart part;
    part.part = id;
    const auto idx = m.indices();
    Rgb mean{};
    for (std::size_t i : idx) {
      const Rgb c = image.pixel(i);
      mean.r += c.r;
      mean.g += c.g;
      mean.b += c.b;
    }
    const double n = static_cast<double>(idx.size());
    mean = {mean.r / n, mean.g / n, mean.b / n};
    if (squared_distance(mean, kWhite) <= eps2) {
      part.absent = true;
      part.color = kWhite;
      part.pattern = Pattern::kUnset;
      scene.parts.push_back(part);
      continue;
    }
    Rgb plain{}, stripe{}, all{};
    std::size_t n_plain = 0, n_stripe = 0;
    for (std::size_t i : idx) {
      const Rgb c = image.pixel(i);
      if (squared_distance(c, kWhite) <= eps2) continue;
      const bool dark_row = is_stripe_row(static_cast<int>(i / kCanvasSize));
      Rgb& acc = dark_row ? stripe : plain;
      (dark_row ? n_stripe : n_plain)++;
      acc.r += c.r;
      acc.g += c.g;
      acc.b += c.b;
    }
    const std::size_t n_colored = n_plain + n_stripe;
    all = {(plain.r + stripe.r) / n_colored, (plain.g + stripe.g) / n_colored, (plain.b + stripe.b) / n_colored};
    Rgb color = all;
    part.pattern = Pattern::kPlain;
    if (n_plain > 0 && n_stripe > 0) {
      const Rgb mp{plain.r / n_plain, plain.g / n_plain, plain.b / n_plain};
      const Rgb ms{stripe.r / n_stripe, stripe.g / n_stripe, stripe.b / n_stripe};
      const Rgb shaded{mp.r * kStripeShade, mp.g * kStripeShade, mp.b * kStripeShade};
      if (squared_distance(ms, shaded) < 0.05 * 0.05 && squared_distance(ms, mp) > 0.05 * 0.05) {
        part.pattern = Pattern::kStriped;
        color = mp;
      }
    }
    part.color = world.lexicon.colors.at(world.lexicon.nearest_color(color)).rgb;
    if (has_length_axis(id)) {
      const double coverage = static_cast<double>(n_colored) / n;
      part.length = coverage >= 0.75 ? Length::kLong : Length::kShort;
    }
    scene.parts.push_back(part);
  }
  return scene;
}

}  // namespace garmentsynth
