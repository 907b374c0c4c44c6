#include "garmentsynth/latent.hpp"

#include <cmath>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

bool Latent::finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Latent::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

Latent encode(const Image& image) {
  if (image.width() != kCanvasSize || image.height() != kCanvasSize) {
    throw Error(ErrorCode::kBadShape, "encode expects a 64x64 image");
  }
  Latent z;
  constexpr double kInv = 1.0 / (kPoolFactor * kPoolFactor);
  for (int ly = 0; ly < kLatentSize; ++ly) {
    for (int lx = 0; lx < kLatentSize; ++lx) {
      for (int c = 0; c < kChannels; ++c) {
        double s = 0.0;
        for (int dy = 0; dy < kPoolFactor; ++dy) {
          for (int dx = 0; dx < kPoolFactor; ++dx) s += image.at(lx * kPoolFactor + dx, ly * kPoolFactor + dy, c);
        }
        z.at(lx, ly, c) = s * kInv;
      }
    }
  }
  return z;
}

Image decode(const Latent& z) {
  Image img(kCanvasSize, kCanvasSize);
  for (int y = 0; y < kCanvasSize; ++y) {
    for (int x = 0; x < kCanvasSize; ++x) {
      for (int c = 0; c < kChannels; ++c) img.at(x, y, c) = z.at(x / kPoolFactor, y / kPoolFactor, c);
    }
  }
  return img;
}

Latent decode_adjoint(const Image& image_grad) {
  Latent g;
  for (int y = 0; y < kCanvasSize; ++y) {
    for (int x = 0; x < kCanvasSize; ++x) {
      for (int c = 0; c < kChannels; ++c) g.at(x / kPoolFactor, y / kPoolFactor, c) += image_grad.at(x, y, c);
    }
  }
  return g;
}

Mask latent_mask(const Mask& canvas_mask) {
  Mask out(kLatentSize, kLatentSize);
  int best = 0;
  std::size_t best_cell = 0;
  for (int ly = 0; ly < kLatentSize; ++ly) {
    for (int lx = 0; lx < kLatentSize; ++lx) {
      int n = 0;
      for (int dy = 0; dy < kPoolFactor; ++dy) {
        for (int dx = 0; dx < kPoolFactor; ++dx) n += canvas_mask.at(lx * kPoolFactor + dx, ly * kPoolFactor + dy);
      }
      const std::size_t cell = static_cast<std::size_t>(ly) * kLatentSize + lx;
      if (2 * n >= kPoolFactor * kPoolFactor) out.set(cell, true);
      if (n > best) {
        best = n;
        best_cell = cell;
      }
    }
  }
  if (best > 0 && out.count() == 0) out.set(best_cell, true);
  return out;
}

}  // namespace garmentsynth
