#pragma once

// Brute-force reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "linf/image.hpp"
#include "linf/resample.hpp"
#include "linf/tensor.hpp"

namespace linf::oracle {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline Image random_image(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (double& v : img.data()) v = u(rng);
  return img;
}

/// Laplace expansion along the first row.
inline double cofactor_det(const std::vector<double>& a, std::size_t n) {
  if (n == 1) return a[0];
  double det = 0.0;
  std::vector<double> minor((n - 1) * (n - 1));
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t k = 0;
    for (std::size_t r = 1; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (c != col) minor[k++] = a[r * n + c];
      }
    }
    const double sign = (col % 2 == 0) ? 1.0 : -1.0;
    det += sign * a[col] * cofactor_det(minor, n - 1);
  }
  return det;
}

/// Direct same-padded convolution, NHWC input, kernel [k×k×Cin×Cout].
inline Tensor naive_conv2d(const Tensor& in, const Tensor& kernel) {
  const std::size_t n = in.extent(0), h = in.extent(1), w = in.extent(2), cin = in.extent(3);
  const std::size_t k = kernel.extent(0), cout = kernel.extent(3);
  const long pad = static_cast<long>(k / 2);
  Tensor out({n, h, w, cout});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t o = 0; o < cout; ++o) {
          double acc = 0.0;
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx) {
              const long sy = static_cast<long>(y + dy) - pad, sx = static_cast<long>(x + dx) - pad;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
              for (std::size_t c = 0; c < cin; ++c) {
                acc += in[((b * h + sy) * w + sx) * cin + c] * kernel[((dy * k + dx) * cin + c) * cout + o];
              }
            }
          out[((b * h + y) * w + x) * cout + o] = acc;
        }
  return out;
}

/// Bilinear sampling written from the pixel-center definition, one output at a time.
inline Image naive_bilinear(const Image& img, std::size_t th, std::size_t tw) {
  Image out(th, tw);
  const double H = static_cast<double>(img.height()), W = static_cast<double>(img.width());
  for (std::size_t oy = 0; oy < th; ++oy)
    for (std::size_t ox = 0; ox < tw; ++ox) {
      // Continuous coordinate of the output pixel center mapped onto the source lattice.
      const double cy = pixel_center(oy, th), cx = pixel_center(ox, tw);
      const double sy = std::clamp((cy + 1.0) * H / 2.0 - 0.5, 0.0, H - 1.0);
      const double sx = std::clamp((cx + 1.0) * W / 2.0 - 0.5, 0.0, W - 1.0);
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t y = 0; y < img.height(); ++y)
          for (std::size_t x = 0; x < img.width(); ++x) {
            const double wy = std::max(0.0, 1.0 - std::abs(sy - static_cast<double>(y)));
            const double wx = std::max(0.0, 1.0 - std::abs(sx - static_cast<double>(x)));
            acc += wy * wx * img.at(y, x, c);
          }
        out.at(oy, ox, c) = acc;
      }
    }
  return out;
}

/// Non-separable 2D bicubic sum with edge clamping and kernel stretching on shrink.
inline Image naive_bicubic(const Image& img, std::size_t th, std::size_t tw) {
  const long H = static_cast<long>(img.height()), W = static_cast<long>(img.width());
  const double sh = std::max(1.0, static_cast<double>(H) / static_cast<double>(th));
  const double sw = std::max(1.0, static_cast<double>(W) / static_cast<double>(tw));
  Image out(th, tw);
  for (std::size_t oy = 0; oy < th; ++oy)
    for (std::size_t ox = 0; ox < tw; ++ox) {
      const double cy = (oy + 0.5) * static_cast<double>(H) / th - 0.5;
      const double cx = (ox + 0.5) * static_cast<double>(W) / tw - 0.5;
      double acc[3] = {0, 0, 0}, total = 0.0;
      for (long y = static_cast<long>(cy - 2 * sh) - 2; y <= static_cast<long>(cy + 2 * sh) + 2; ++y)
        for (long x = static_cast<long>(cx - 2 * sw) - 2; x <= static_cast<long>(cx + 2 * sw) + 2; ++x) {
          const double wgt = cubic_kernel((y - cy) / sh) * cubic_kernel((x - cx) / sw);
          if (wgt == 0.0) continue;
          const std::size_t yy = static_cast<std::size_t>(std::clamp(y, 0L, H - 1));
          const std::size_t xx = static_cast<std::size_t>(std::clamp(x, 0L, W - 1));
          for (std::size_t c = 0; c < 3; ++c) acc[c] += wgt * img.at(yy, xx, c);
          total += wgt;
        }
      for (std::size_t c = 0; c < 3; ++c) out.at(oy, ox, c) = std::clamp(acc[c] / total, 0.0, 1.0);
    }
  return out;
}

inline double max_image_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace linf::oracle
