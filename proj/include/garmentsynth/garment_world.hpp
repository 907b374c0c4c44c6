#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "garmentsynth/image.hpp"
#include "garmentsynth/lexicon.hpp"

namespace garmentsynth {

// Fixed part layout for one garment category at canvas resolution.
struct LayoutTemplate {
  std::string category;
  std::vector<std::pair<PartId, Mask>> parts;  // sorted by PartId

  bool has_part(PartId part) const;
  // Throws InvalidScene when the category has no such part.
  const Mask& mask(PartId part) const;
  Mask background() const;
};

// Only sleeves carry a length attribute; short keeps the upper half.
bool has_length_axis(PartId part);

// Mask restricted to its upper half along the length axis.
Mask shortened(const Mask& mask);

class TemplateSet {
 public:
  static TemplateSet builtin();
  // {category: {part_name: [run lengths]}}, runs alternate 0/1 starting with 0,
  // row-major over the 64x64 canvas.
  static TemplateSet from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  void add(LayoutTemplate t);
  // Throws UnknownCategory.
  const LayoutTemplate& at(const std::string& category) const;
  bool contains(const std::string& category) const { return templates_.contains(category); }
  std::vector<std::string> categories() const;

  // Pairwise disjoint parts, each at least 16 pixels, canvas-sized.
  void validate() const;

 private:
  std::map<std::string, LayoutTemplate> templates_;
};

std::vector<int> encode_rle(const Mask& mask);
Mask decode_rle(const std::vector<int>& counts, int width, int height);

struct World {
  Lexicon lexicon;
  TemplateSet templates;

  static World builtin();
};

struct ScenePart {
  PartId part = PartId::kBody;
  Rgb color;
  Length length = Length::kUnset;  // kUnset on parts without a length axis
  Pattern pattern = Pattern::kPlain;
  bool absent = false;

  friend bool operator==(const ScenePart&, const ScenePart&) = default;
};

struct GarmentScene {
  std::string category;
  std::vector<ScenePart> parts;

  const ScenePart* find(PartId part) const;
  nlohmann::json to_json(const Lexicon& lexicon) const;
  // Inverse of to_json. Throws InvalidScene on malformed input.
  static GarmentScene from_json(const nlohmann::json& j);

  friend bool operator==(const GarmentScene&, const GarmentScene&) = default;
};

struct PartImage {
  PartId part;
  Image image;  // full image restricted to mask, white elsewhere
  Mask mask;
};

struct PartSet {
  Image full_image;
  std::vector<PartImage> parts;
};

Image render(const GarmentScene& scene, const TemplateSet& templates);

PartSet segment(const Image& image, const std::string& category, const TemplateSet& templates);

GarmentScene infer_scene(const Image& image, const std::string& category, const World& world);

}  // namespace garmentsynth
