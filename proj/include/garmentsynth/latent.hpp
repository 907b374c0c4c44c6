#pragma once

#include <cstddef>
#include <vector>

#include "garmentsynth/image.hpp"

namespace garmentsynth {

// 16x16x3 diffusion state, pixel-major with interleaved channels.
struct Latent {
  std::vector<double> values = std::vector<double>(kLatentPixels * kChannels, 0.0);
  int t = 0;

  double& at(int x, int y, int c) { return values[(static_cast<std::size_t>(y) * kLatentSize + x) * kChannels + c]; }
  double at(int x, int y, int c) const {
    return values[(static_cast<std::size_t>(y) * kLatentSize + x) * kChannels + c];
  }
  Rgb pixel(std::size_t p) const { return {values[3 * p], values[3 * p + 1], values[3 * p + 2]}; }

  bool finite() const;
  double norm() const;

  friend bool operator==(const Latent&, const Latent&) = default;
};

// 4x4 average pooling. Throws BadShape on non-64x64 input.
Latent encode(const Image& image);

// Nearest-neighbour upsampling 16 -> 64. Not clamped; see Image::clamped.
Image decode(const Latent& z);

// Adjoint of decode: sums an image-space gradient over each 4x4 block.
Latent decode_adjoint(const Image& image_grad);

// Block-majority downsampling of a canvas mask; a non-empty mask always keeps
// at least its best-covered block.
Mask latent_mask(const Mask& canvas_mask);

}  // namespace garmentsynth
