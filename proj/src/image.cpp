#include "garmentsynth/image.hpp"

#include <algorithm>

#include "garmentsynth/error.hpp"

namespace garmentsynth {

Image::Image(int width, int height, Rgb fill)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height * kChannels) {
  for (std::size_t i = 0; i < pixel_count(); ++i) set_pixel(i, fill);
}

Image Image::clamped() const {
  Image out = *this;
  for (double& v : out.data_) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Mask::Mask(int width, int height, bool fill)
    : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> Mask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(i);
  }
  return out;
}

bool Mask::intersects(const Mask& other) const {
  if (other.size() != size()) throw Error(ErrorCode::kLengthMismatch, "mask sizes differ");
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && other.bits_[i]) return true;
  }
  return false;
}

Mask Mask::operator|(const Mask& other) const {
  if (other.size() != size()) throw Error(ErrorCode::kLengthMismatch, "mask sizes differ");
  Mask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

Mask Mask::operator&(const Mask& other) const {
  if (other.size() != size()) throw Error(ErrorCode::kLengthMismatch, "mask sizes differ");
  Mask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

Mask Mask::operator~() const {
  Mask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

Mask Mask::upsampled(int factor) const {
  Mask out(width_ * factor, height_ * factor);
  for (int y = 0; y < out.height_; ++y) {
    for (int x = 0; x < out.width_; ++x) out.set(x, y, at(x / factor, y / factor));
  }
  return out;
}

}  // namespace garmentsynth
