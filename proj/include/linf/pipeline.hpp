#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "linf/image.hpp"
#include "linf/implicit.hpp"
#include "linf/metrics.hpp"
#include "linf/model.hpp"

namespace linf {

/// Scale factor with source extents and rounded target extents.
struct ScaleSpec {
  double scale = 1.0;
  std::size_t src_h = 0, src_w = 0;
  std::size_t dst_h = 0, dst_w = 0;

  /// dst = round(s·src). Throws UsageError for s <= 0 or an empty target.
  static ScaleSpec make(double scale, std::size_t src_h, std::size_t src_w);
};

/// Ceil tiling of a target_h×target_w raster into n×n patches anchored top-left.
struct PatchGrid {
  std::size_t n = 1;
  std::size_t rows = 0;  // h = ceil(target_h / n)
  std::size_t cols = 0;  // w = ceil(target_w / n)
  std::size_t target_h = 0;
  std::size_t target_w = 0;

  std::size_t patch_count() const { return rows * cols; }
  std::size_t dim() const { return 3 * n * n; }
  /// Center of the uncropped n×n footprint in [-1,1]²; may overshoot at the far border.
  Coord center(std::size_t i, std::size_t j) const;
  /// Extents of patch (i, j) after cropping to the raster.
  std::size_t crop_h(std::size_t i) const;
  std::size_t crop_w(std::size_t j) const;
};

PatchGrid build_grid(const ScaleSpec& spec, std::size_t n);

/// Flat index of (row, col, channel) inside a patch vector: channels innermost.
inline std::size_t patch_offset(std::size_t n, std::size_t r, std::size_t c, std::size_t ch) {
  return (r * n + c) * 3 + ch;
}

/// hr − bilinear_upsample(lr) cut into patches, [patch_count × 3n²]. Positions of
/// border patches outside the raster repeat the nearest in-raster residual. With a
/// positive `dequant_amplitude`, uniform noise in ±amplitude/2 is added.
Tensor extract_targets(const Image& hr, const Image& lr, const PatchGrid& grid, double dequant_amplitude = 0.0,
                       std::mt19937_64* rng = nullptr);

/// Writes patches into a [target_h × target_w × 3] raster, cropping border patches.
Tensor reassemble(const Tensor& patches, const PatchGrid& grid);

/// Number of times each output pixel is written by reassemble, [target_h × target_w].
std::vector<int> coverage_mask(const PatchGrid& grid);

struct SrOptions {
  double tau = 0.0;
  std::uint64_t seed = 0;
  EnsembleMode mode = EnsembleMode::fourier;
  PassCounters* counters = nullptr;
  std::size_t chunk = 4096;  // queries per batched conditioner evaluation
  std::size_t threads = 0;   // 0: default_thread_count()
};

/// LINF_THREADS when set to a positive integer, else the hardware concurrency.
std::size_t default_thread_count();

/// Runs body(0..count-1) on up to `threads` workers; the first exception is rethrown.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

/// Per-patch RNG stream derived from (seed, i, j); independent of evaluation order.
std::mt19937_64 patch_rng(std::uint64_t seed, std::size_t i, std::size_t j);

/// Encodes `lr` once, generates every grid patch (one conditioner and one flow pass
/// per patch in fourier mode), reassembles, adds the bilinear upsample, and clamps.
Image super_resolve(const Image& lr, double scale, const LinfModel& model, const SrOptions& options);

/// Evaluation pair for scale s: lr is floor(H/s)×floor(W/s), hr the top-left crop
/// of the matching round(s·h)×round(s·w) extent, lr = bicubic(hr).
struct EvalPair {
  Image hr;
  Image lr;
};
EvalPair make_eval_pair(const Image& hr, double scale);

/// Metrics of `samples` SR draws against pair.hr (one draw when τ = 0). PSNR and
/// SSIM are averaged over draws; draw k uses seed + k. Without a model the
/// bilinear upsample is scored.
MetricReport evaluate_pair(const EvalPair& pair, double scale, const LinfModel* model, const SrOptions& options,
                           std::size_t samples);

}  // namespace linf
