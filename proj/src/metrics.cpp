#include "linf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "linf/errors.hpp"

namespace linf {
namespace {

void require_same_extents(const Image& a, const Image& b, const char* op) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError(std::string(op) + ": image extents differ");
  }
}

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (std::size_t i = 0; i < kWindow; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(kWindow / 2);
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable valid-region Gaussian filter of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) s += g[k] * plane[y * w + x + k];
      tmp[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < kWindow; ++k) s += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double mse(const Image& a, const Image& b, bool on_y_channel) {
  require_same_extents(a, b, "mse");
  double acc = 0.0;
  if (on_y_channel) {
    for (std::size_t y = 0; y < a.height(); ++y) {
      for (std::size_t x = 0; x < a.width(); ++x) {
        const double d = luma(a.at(y, x, 0), a.at(y, x, 1), a.at(y, x, 2)) -
                         luma(b.at(y, x, 0), b.at(y, x, 1), b.at(y, x, 2));
        acc += d * d;
      }
    }
    return acc / static_cast<double>(a.pixel_count());
  }
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

double psnr(const Image& a, const Image& b, bool on_y_channel) {
  const double e = mse(a, b, on_y_channel);
  if (e == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / e);
}

double ssim(const Image& a, const Image& b) {
  require_same_extents(a, b, "ssim");
  const std::size_t h = a.height(), w = a.width();
  if (h < kWindow || w < kWindow) throw UsageError("ssim needs images of at least 11x11");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const std::vector<double> g = gaussian_window();
  double total = 0.0;
  for (std::size_t c = 0; c < Image::kChannels; ++c) {
    std::vector<double> pa(h * w), pb(h * w), paa(h * w), pbb(h * w), pab(h * w);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double va = a.at(y, x, c), vb = b.at(y, x, c);
        const std::size_t i = y * w + x;
        pa[i] = va;
        pb[i] = vb;
        paa[i] = va * va;
        pbb[i] = vb * vb;
        pab[i] = va * vb;
      }
    }
    const auto mu_a = filter_valid(pa, h, w, g);
    const auto mu_b = filter_valid(pb, h, w, g);
    const auto e_aa = filter_valid(paa, h, w, g);
    const auto e_bb = filter_valid(pbb, h, w, g);
    const auto e_ab = filter_valid(pab, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double var_a = e_aa[i] - ma * ma;
      const double var_b = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    total += acc / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(Image::kChannels);
}

double diversity(std::span<const Image> samples) {
  if (samples.size() < 2) throw UsageError("diversity needs at least two samples");
  for (const Image& s : samples) require_same_extents(samples[0], s, "diversity");
  const std::size_t n = samples[0].data().size();
  const double k = static_cast<double>(samples.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Offsets from the first sample, so identical samples give exactly zero.
    const double base = samples[0].data()[i];
    double m = 0.0;
    for (const Image& s : samples) m += s.data()[i] - base;
    m /= k;
    double v = 0.0;
    for (const Image& s : samples) {
      const double d = s.data()[i] - base - m;
      v += d * d;
    }
    acc += std::sqrt(v / k);
  }
  return acc / static_cast<double>(n);
}

const char* MetricReport::csv_header() { return "image_id,scale,tau,psnr_y,psnr_rgb,ssim,diversity"; }

std::string format_db(double value) {
  if (std::isinf(value)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string MetricReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%s,%s,%.6f,%.6f", image_id.c_str(), scale, tau,
                format_db(psnr_y).c_str(), format_db(psnr_rgb).c_str(), ssim, diversity);
  return buf;
}

}  // namespace linf
