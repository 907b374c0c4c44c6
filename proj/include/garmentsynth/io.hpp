#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "garmentsynth/garment_world.hpp"
#include "garmentsynth/image.hpp"

namespace garmentsynth {

// 8-bit RGB PNG. Values are clamped and rounded. Throws Io.
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

// Throws Io on read/write failure, InvalidConfig on malformed JSON.
nlohmann::json read_json(const std::string& path);
void write_json(const std::string& path, const nlohmann::json& j);

// Built-in lexicon/templates unless a path is given; loaded files are validated.
World load_world(const std::string& lexicon_path, const std::string& templates_path);

// Quantizes an image the way write_png does, for comparisons against files.
Image quantized(const Image& image);

}  // namespace garmentsynth
