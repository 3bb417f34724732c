#include "linf/image.hpp"

#include <algorithm>
#include <cmath>

#include "linf/errors.hpp"

namespace linf {

Image::Image(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width * kChannels, fill) {
  if (height == 0 || width == 0) throw UsageError("image extents must be at least 1x1");
}

Image::Image(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height == 0 || width == 0) throw UsageError("image extents must be at least 1x1");
  if (data_.size() != height * width * kChannels) throw DimensionError("image data length does not match extents");
}

void Image::clamp() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

void Image::quantize() {
  for (double& v : data_) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

Image Image::flipped_horizontally() const {
  Image out(height_, width_);
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) {
      for (std::size_t c = 0; c < kChannels; ++c) out.at(y, x, c) = at(y, width_ - 1 - x, c);
    }
  }
  return out;
}

Image Image::crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const {
  if (y0 + h > height_ || x0 + w > width_) throw UsageError("crop window exceeds image");
  Image out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(((y0 + y) * width_ + x0) * kChannels), w * kChannels,
                out.data_.begin() + static_cast<std::ptrdiff_t>(y * w * kChannels));
  }
  return out;
}

Tensor Image::to_tensor() const { return Tensor({height_, width_, kChannels}, data_); }

Image Image::from_tensor(const Tensor& t) {
  if (t.rank() != 3 || t.extent(2) != kChannels) throw DimensionError("image tensor must be [H x W x 3]");
  return Image(t.extent(0), t.extent(1), std::vector<double>(t.data().begin(), t.data().end()));
}

}  // namespace linf
