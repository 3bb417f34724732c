#pragma once

#include <limits>
#include <span>
#include <string>

#include "linf/image.hpp"

namespace linf {

/// PSNR value reported for bit-identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// BT.601 full-range luma.
inline double luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

double mse(const Image& a, const Image& b, bool on_y_channel = false);

/// 10·log10(1/MSE), peak 1.0. Returns kPsnrIdentical when MSE is zero.
double psnr(const Image& a, const Image& b, bool on_y_channel = false);

/// Single-scale SSIM, 11×11 Gaussian window (σ = 1.5), C1 = 0.01², C2 = 0.03²,
/// valid-region mean, averaged over the three channels.
double ssim(const Image& a, const Image& b);

/// Mean over pixels and channels of the population standard deviation across samples.
double diversity(std::span<const Image> samples);

struct MetricReport {
  std::string image_id;
  double scale = 0.0;
  double tau = 0.0;
  double psnr_y = 0.0;
  double psnr_rgb = 0.0;
  double ssim = 0.0;
  double diversity = 0.0;

  static const char* csv_header();  // image_id,scale,tau,psnr_y,psnr_rgb,ssim,diversity
  std::string csv_row() const;
};

/// Formats a PSNR value for CSV output; the identical-input sentinel prints as "inf".
std::string format_db(double value);

}  // namespace linf
