#include "linf/resample.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "linf/errors.hpp"

namespace linf {
namespace {

void check_target(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw UsageError("resample target extent must be at least 1");
}

// Sparse 1D resampling matrix: each output index holds (source index, weight) taps.
struct AxisTaps {
  std::vector<std::size_t> offsets;  // taps for output o are [offsets[o], offsets[o+1])
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

AxisTaps cubic_taps(std::size_t in, std::size_t out) {
  AxisTaps taps;
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double stretch = std::max(1.0, 1.0 / scale);
  const double support = 2.0 * stretch;
  taps.offsets.push_back(0);
  for (std::size_t o = 0; o < out; ++o) {
    const double center = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const long lo = static_cast<long>(std::floor(center - support));
    const long hi = static_cast<long>(std::ceil(center + support));
    const std::size_t first = taps.weight.size();
    double total = 0.0;
    for (long i = lo; i <= hi; ++i) {
      const double w = cubic_kernel((static_cast<double>(i) - center) / stretch);
      if (w == 0.0) continue;
      taps.index.push_back(static_cast<std::size_t>(std::clamp(i, 0L, static_cast<long>(in) - 1)));
      taps.weight.push_back(w);
      total += w;
    }
    for (std::size_t t = first; t < taps.weight.size(); ++t) taps.weight[t] /= total;
    taps.offsets.push_back(taps.weight.size());
  }
  return taps;
}

}  // namespace

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double t = std::abs(x);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

Image bilinear_upsample(const Image& img, std::size_t target_h, std::size_t target_w) {
  check_target(target_h, target_w);
  const std::size_t h = img.height(), w = img.width();
  Image out(target_h, target_w);
  auto source = [](std::size_t o, std::size_t in, std::size_t outn, std::size_t& i0, std::size_t& i1, double& f) {
    double s = (static_cast<double>(o) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, in - 1);
    f = s - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < target_h; ++y) {
    std::size_t y0, y1;
    double fy;
    source(y, h, target_h, y0, y1, fy);
    for (std::size_t x = 0; x < target_w; ++x) {
      std::size_t x0, x1;
      double fx;
      source(x, w, target_w, x0, x1, fx);
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
        const double bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
        out.at(y, x, c) = std::clamp(top * (1.0 - fy) + bottom * fy, 0.0, 1.0);
      }
    }
  }
  return out;
}

Image bicubic_resample(const Image& img, std::size_t target_h, std::size_t target_w) {
  check_target(target_h, target_w);
  const std::size_t h = img.height(), w = img.width();
  const AxisTaps tx = cubic_taps(w, target_w);
  const AxisTaps ty = cubic_taps(h, target_h);
  constexpr std::size_t C = Image::kChannels;

  std::vector<double> rows(h * target_w * C, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < target_w; ++x) {
      double acc[C] = {0.0, 0.0, 0.0};
      for (std::size_t t = tx.offsets[x]; t < tx.offsets[x + 1]; ++t) {
        for (std::size_t c = 0; c < C; ++c) acc[c] += tx.weight[t] * img.at(y, tx.index[t], c);
      }
      for (std::size_t c = 0; c < C; ++c) rows[(y * target_w + x) * C + c] = acc[c];
    }
  }
  Image out(target_h, target_w);
  for (std::size_t y = 0; y < target_h; ++y) {
    for (std::size_t x = 0; x < target_w; ++x) {
      double acc[C] = {0.0, 0.0, 0.0};
      for (std::size_t t = ty.offsets[y]; t < ty.offsets[y + 1]; ++t) {
        for (std::size_t c = 0; c < C; ++c) acc[c] += ty.weight[t] * rows[(ty.index[t] * target_w + x) * C + c];
      }
      for (std::size_t c = 0; c < C; ++c) out.at(y, x, c) = std::clamp(acc[c], 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace linf
