#pragma once

#include <cstddef>

#include "linf/image.hpp"

namespace linf {

/// Align-centers bilinear interpolation with edge clamping. Works in both directions.
Image bilinear_upsample(const Image& img, std::size_t target_h, std::size_t target_w);

/// Keys cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Align-centers bicubic resampling with clamp-to-edge padding. When shrinking, the
/// kernel is stretched by the inverse scale (antialiased, as in PIL/MATLAB
/// imresize). Output is clamped to [0,1].
Image bicubic_resample(const Image& img, std::size_t target_h, std::size_t target_w);

}  // namespace linf
