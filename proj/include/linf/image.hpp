#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "linf/tensor.hpp"

namespace linf {

/// RGB raster, row-major HWC, nominal range [0,1].
class Image {
 public:
  static constexpr std::size_t kChannels = 3;

  Image() = default;
  Image(std::size_t height, std::size_t width, double fill = 0.0);
  Image(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return kChannels; }
  std::size_t pixel_count() const { return height_ * width_; }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * width_ + x) * kChannels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * width_ + x) * kChannels + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void clamp();
  /// Rounds every value to the nearest multiple of 1/255.
  void quantize();
  Image flipped_horizontally() const;
  Image crop(std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) const;

  /// [H×W×3] tensor view (copy).
  Tensor to_tensor() const;
  static Image from_tensor(const Tensor& t);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Continuous-domain coordinate of pixel center i on an axis of `extent` pixels: (2i+1)/extent - 1.
inline double pixel_center(std::size_t i, std::size_t extent) {
  return (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(extent) - 1.0;
}

}  // namespace linf
