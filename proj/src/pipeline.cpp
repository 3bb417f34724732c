#include "linf/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "linf/errors.hpp"
#include "linf/ops.hpp"
#include "linf/resample.hpp"

namespace linf {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class Fn>
void for_each_placed_pixel(const PatchGrid& grid, Fn&& fn) {
  for (std::size_t i = 0; i < grid.rows; ++i) {
    for (std::size_t j = 0; j < grid.cols; ++j) {
      const std::size_t ch = grid.crop_h(i), cw = grid.crop_w(j);
      for (std::size_t r = 0; r < ch; ++r) {
        for (std::size_t c = 0; c < cw; ++c) fn(i * grid.cols + j, r, c, i * grid.n + r, j * grid.n + c);
      }
    }
  }
}

}  // namespace

ScaleSpec ScaleSpec::make(double scale, std::size_t src_h, std::size_t src_w) {
  if (!(scale > 0.0)) throw UsageError("scale must be positive");
  ScaleSpec s;
  s.scale = scale;
  s.src_h = src_h;
  s.src_w = src_w;
  s.dst_h = static_cast<std::size_t>(std::llround(scale * static_cast<double>(src_h)));
  s.dst_w = static_cast<std::size_t>(std::llround(scale * static_cast<double>(src_w)));
  if (s.dst_h == 0 || s.dst_w == 0) throw UsageError("scaled extents round to zero");
  return s;
}

Coord PatchGrid::center(std::size_t i, std::size_t j) const {
  const double nh = static_cast<double>(n);
  return {2.0 * (static_cast<double>(i) * nh + nh / 2.0) / static_cast<double>(target_h) - 1.0,
          2.0 * (static_cast<double>(j) * nh + nh / 2.0) / static_cast<double>(target_w) - 1.0};
}

std::size_t PatchGrid::crop_h(std::size_t i) const { return std::min(n, target_h - i * n); }
std::size_t PatchGrid::crop_w(std::size_t j) const { return std::min(n, target_w - j * n); }

PatchGrid build_grid(const ScaleSpec& spec, std::size_t n) {
  if (n < 1) throw UsageError("patch side must be >= 1");
  PatchGrid g;
  g.n = n;
  g.target_h = spec.dst_h;
  g.target_w = spec.dst_w;
  g.rows = (spec.dst_h + n - 1) / n;
  g.cols = (spec.dst_w + n - 1) / n;
  return g;
}

Tensor extract_targets(const Image& hr, const Image& lr, const PatchGrid& grid, double dequant_amplitude,
                       std::mt19937_64* rng) {
  if (hr.height() != grid.target_h || hr.width() != grid.target_w) {
    throw UsageError("HR extents do not match the patch grid");
  }
  if (dequant_amplitude > 0.0 && rng == nullptr) throw UsageError("dequantization noise needs an RNG");
  const Image up = bilinear_upsample(lr, grid.target_h, grid.target_w);
  const std::size_t n = grid.n;
  Tensor out({grid.patch_count(), grid.dim()});
  std::uniform_real_distribution<double> noise(-0.5 * dequant_amplitude, 0.5 * dequant_amplitude);
  for (std::size_t i = 0; i < grid.rows; ++i) {
    for (std::size_t j = 0; j < grid.cols; ++j) {
      double* row = out.raw() + (i * grid.cols + j) * grid.dim();
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t y = std::min(i * n + r, grid.target_h - 1);
        for (std::size_t c = 0; c < n; ++c) {
          const std::size_t x = std::min(j * n + c, grid.target_w - 1);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            double v = hr.at(y, x, ch) - up.at(y, x, ch);
            if (dequant_amplitude > 0.0) v += noise(*rng);
            row[patch_offset(n, r, c, ch)] = v;
          }
        }
      }
    }
  }
  return out;
}

Tensor reassemble(const Tensor& patches, const PatchGrid& grid) {
  if (patches.rank() != 2 || patches.extent(0) != grid.patch_count() || patches.extent(1) != grid.dim()) {
    throw DimensionError("patch tensor does not match the grid");
  }
  Tensor out({grid.target_h, grid.target_w, 3});
  const std::size_t d = grid.dim();
  for_each_placed_pixel(grid, [&](std::size_t p, std::size_t r, std::size_t c, std::size_t y, std::size_t x) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      out[(y * grid.target_w + x) * 3 + ch] = patches[p * d + patch_offset(grid.n, r, c, ch)];
    }
  });
  return out;
}

std::vector<int> coverage_mask(const PatchGrid& grid) {
  std::vector<int> mask(grid.target_h * grid.target_w, 0);
  for_each_placed_pixel(grid, [&](std::size_t, std::size_t, std::size_t, std::size_t y, std::size_t x) {
    ++mask[y * grid.target_w + x];
  });
  return mask;
}

std::mt19937_64 patch_rng(std::uint64_t seed, std::size_t i, std::size_t j) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ (static_cast<std::uint64_t>(i) << 32 ^ static_cast<std::uint64_t>(j)));
  return std::mt19937_64(b);
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("LINF_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next++) < count;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Image super_resolve(const Image& lr, double scale, const LinfModel& model, const SrOptions& options) {
  if (options.tau < 0.0) throw UsageError("temperature must be non-negative");
  const ModelConfig& cfg = model.config;
  const ScaleSpec spec = ScaleSpec::make(scale, lr.height(), lr.width());
  const PatchGrid grid = build_grid(spec, cfg.patch_n);
  const FlowModel flow = model.flow();
  const double cell = 2.0 / scale;
  const std::size_t h = lr.height(), w = lr.width(), d = grid.dim();
  Tensor patches({grid.patch_count(), d});

  auto latent = [&](std::size_t i, std::size_t j) {
    std::vector<double> z(d, 0.0);
    if (options.tau > 0.0) {
      std::mt19937_64 rng = patch_rng(options.seed, i, j);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& v : z) v = options.tau * normal(rng);
    }
    return z;
  };

  if (options.mode == EnsembleMode::local) {
    const FeatureMap fm = model.encode(lr);
    parallel_for(grid.rows, options.threads, [&](std::size_t i) {
      for (std::size_t j = 0; j < grid.cols; ++j) {
        const auto p =
            local_ensemble_predict(fm, grid.center(i, j), cell, model.params, cfg, flow, latent(i, j), options.counters);
        std::copy(p.begin(), p.end(), patches.raw() + (i * grid.cols + j) * d);
      }
    });
  } else {
    Tensor amp, freq;
    {
      Tape tape;
      BoundParams bound(tape, model.params, false);
      Var images = tape.constant(lr.to_tensor().reshaped({1, h, w, 3}));
      const HeadMaps heads = fourier_heads(bound, cfg, encode(bound, cfg.encoder, images));
      amp = heads.amplitude.value();
      freq = heads.frequency.value();
    }
    const std::size_t total = grid.patch_count();
    const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
    parallel_for((total + chunk - 1) / chunk, options.threads, [&](std::size_t c) {
      const std::size_t start = c * chunk, end = std::min(total, start + chunk);
      Tape tape;
      BoundParams bound(tape, model.params, false);
      QueryBatch batch;
      for (std::size_t p = start; p < end; ++p) batch.add(0, h, w, grid.center(p / grid.cols, p % grid.cols), cell);
      const HeadMaps heads{tape.constant(amp), tape.constant(freq)};
      Var phases = phase_mlp(bound, tape.constant(Tensor({batch.size()}, batch.cells)));
      Var raw = conditioner_raw(bound, fourier_ensemble(heads, phases, batch, cfg));
      const Tensor& rv = raw.value();
      const std::size_t width = cfg.conditioner_out();
      for (std::size_t p = start; p < end; ++p) {
        const auto cond = ConditionerOutput::from_raw(rv.data().subspan((p - start) * width, width), cfg.flow_layers, d);
        const auto m = flow.inverse(latent(p / grid.cols, p % grid.cols), cond);
        std::copy(m.begin(), m.end(), patches.raw() + p * d);
      }
      if (options.counters) {
        options.counters->estimator += 4 * batch.size();
        options.counters->conditioner += batch.size();
        options.counters->flow += batch.size();
      }
    });
  }

  const Tensor texture = reassemble(patches, grid);
  Image out = bilinear_upsample(lr, grid.target_h, grid.target_w);
  for (std::size_t i = 0; i < texture.size(); ++i) out.data()[i] += texture[i];
  out.clamp();
  return out;
}

EvalPair make_eval_pair(const Image& hr, double scale) {
  if (!(scale > 0.0)) throw UsageError("scale must be positive");
  const auto h = static_cast<std::size_t>(std::floor(hr.height() / scale));
  const auto w = static_cast<std::size_t>(std::floor(hr.width() / scale));
  if (h == 0 || w == 0) throw UsageError("image too small for scale " + std::to_string(scale));
  const ScaleSpec spec = ScaleSpec::make(scale, h, w);
  if (spec.dst_h > hr.height() || spec.dst_w > hr.width()) throw UsageError("image too small for scale");
  EvalPair p;
  p.hr = hr.crop(0, 0, spec.dst_h, spec.dst_w);
  p.lr = bicubic_resample(p.hr, h, w);
  return p;
}

MetricReport evaluate_pair(const EvalPair& pair, double scale, const LinfModel* model, const SrOptions& options,
                           std::size_t samples) {
  MetricReport r;
  r.scale = scale;
  r.tau = model ? options.tau : 0.0;
  const std::size_t draws = (model && options.tau > 0.0) ? std::max<std::size_t>(1, samples) : 1;
  std::vector<Image> outs;
  for (std::size_t k = 0; k < draws; ++k) {
    if (model) {
      SrOptions o = options;
      o.seed = options.seed + k;
      outs.push_back(super_resolve(pair.lr, scale, *model, o));
    } else {
      outs.push_back(bilinear_upsample(pair.lr, pair.hr.height(), pair.hr.width()));
    }
    r.psnr_y += psnr(outs.back(), pair.hr, true) / draws;
    r.psnr_rgb += psnr(outs.back(), pair.hr, false) / draws;
    r.ssim += ssim(outs.back(), pair.hr) / draws;
  }
  r.diversity = draws > 1 ? diversity(outs) : 0.0;
  return r;
}

}  // namespace linf
