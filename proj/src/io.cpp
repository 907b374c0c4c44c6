#include "garmentsynth/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports through these instead of printing to stderr.
void on_png_error(png_structp png, png_const_charp message) {
  if (auto* out = static_cast<std::string*>(png_get_error_ptr(png))) *out = message;
  png_longjmp(png, 1);
}
void on_png_warning(png_structp, png_const_charp) {}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

Image quantized(const Image& image) {
  Image out = image;
  for (double& v : out.data()) v = to_byte(v) / 255.0;
  return out;
}

void write_png(const std::string& path, const Image& image) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  std::string reason;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &reason, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "libpng initialisation failed");
  }
  std::vector<std::uint8_t> rows(image.pixel_count() * 3);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = to_byte(image.data()[i]);
  std::vector<png_bytep> row_ptrs(image.height());
  for (int y = 0; y < image.height(); ++y) row_ptrs[y] = rows.data() + static_cast<std::size_t>(y) * image.width() * 3;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIo, "failed writing '" + path + "': " + reason);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::string reason;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &reason, on_png_error, on_png_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIo, "libpng initialisation failed");
  }
  std::vector<std::uint8_t> rows;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIo, "'" + path + "' is not a readable PNG: " + reason);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  // Normalise every format to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  rows.resize(static_cast<std::size_t>(width) * height * 3);
  row_ptrs.resize(height);
  for (int y = 0; y < height; ++y) row_ptrs[y] = rows.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(width, height);
  for (std::size_t i = 0; i < rows.size(); ++i) img.data()[i] = rows[i] / 255.0;
  return img;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, "'" + path + "': " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

World load_world(const std::string& lexicon_path, const std::string& templates_path) {
  World world = World::builtin();
  if (!lexicon_path.empty()) {
    world.lexicon = Lexicon::from_json(read_json(lexicon_path));
  }
  if (!templates_path.empty()) {
    world.templates = TemplateSet::from_json(read_json(templates_path));
  }
  return world;
}

}  // namespace garmentsynth
