#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "garmentsynth/types.hpp"

namespace garmentsynth {

// Row-major RGB image with interleaved channels. Values are nominally in
// [0, 1] but intermediate images (decoded noisy latents) are not clamped.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = kWhite);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double& at(int x, int y, int c) { return data_[index(x, y) * kChannels + c]; }
  double at(int x, int y, int c) const { return data_[index(x, y) * kChannels + c]; }

  Rgb pixel(std::size_t i) const { return {data_[3 * i], data_[3 * i + 1], data_[3 * i + 2]}; }
  void set_pixel(std::size_t i, const Rgb& c) {
    data_[3 * i] = c.r;
    data_[3 * i + 1] = c.g;
    data_[3 * i + 2] = c.b;
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Image clamped() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

// Boolean raster. Used at canvas resolution for template masks and at latent
// resolution for binarized attention maps.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const;
  std::vector<std::size_t> indices() const;
  bool intersects(const Mask& other) const;

  Mask operator|(const Mask& other) const;
  Mask operator&(const Mask& other) const;
  Mask operator~() const;

  // Nearest-neighbour resampling by an integer factor in either direction.
  Mask upsampled(int factor) const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace garmentsynth
