#include "linf/implicit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "linf/errors.hpp"
#include "linf/layers.hpp"
#include "linf/ops.hpp"

namespace linf {
namespace {

std::size_t nearest_axis(double coord, std::size_t extent) {
  // Pixel i covers ((i)·2/n - 1, (i+1)·2/n - 1]; the boundary belongs to the lower index.
  const double u = (coord + 1.0) * static_cast<double>(extent) / 2.0;
  const double i = std::ceil(u) - 1.0;
  if (i < 0.0) return 0;
  return std::min(static_cast<std::size_t>(i), extent - 1);
}

// Continuous lattice position clamped to [0, extent-1]; returns the lower corner.
std::size_t lower_corner(double coord, std::size_t extent) {
  if (extent == 1) return 0;
  double u = (coord + 1.0) * static_cast<double>(extent) / 2.0 - 0.5;
  u = std::clamp(u, 0.0, static_cast<double>(extent - 1));
  return std::min(static_cast<std::size_t>(std::floor(u)), extent - 2);
}

std::vector<double> dense(const ParamSet& params, const std::string& prefix, std::span<const double> in, bool relu) {
  const Tensor& w = params.get(prefix + ".w");
  const Tensor& b = params.get(prefix + ".b");
  if (w.extent(0) != in.size()) throw DimensionError("layer '" + prefix + "' input extent mismatch");
  const std::size_t out_n = w.extent(1);
  std::vector<double> out(b.data().begin(), b.data().end());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    if (v == 0.0) continue;
    const double* row = w.raw() + i * out_n;
    for (std::size_t j = 0; j < out_n; ++j) out[j] += v * row[j];
  }
  if (relu) {
    for (double& v : out) v = std::max(v, 0.0);
  }
  return out;
}

// 3×3 same-padded conv head evaluated at one lattice position.
std::vector<double> conv_at(const FeatureMap& fm, LatticeIndex idx, const ParamSet& params, const std::string& prefix) {
  const Tensor& w = params.get(prefix + ".w");
  const Tensor& b = params.get(prefix + ".b");
  const std::size_t k = w.extent(0), cin = w.extent(2), cout = w.extent(3);
  if (cin != fm.channels) throw DimensionError("conv head '" + prefix + "' channel mismatch");
  const long pad = static_cast<long>(k / 2);
  std::vector<double> out(b.data().begin(), b.data().end());
  for (std::size_t dy = 0; dy < k; ++dy) {
    const long sy = static_cast<long>(idx.row + dy) - pad;
    if (sy < 0 || sy >= static_cast<long>(fm.height)) continue;
    for (std::size_t dx = 0; dx < k; ++dx) {
      const long sx = static_cast<long>(idx.col + dx) - pad;
      if (sx < 0 || sx >= static_cast<long>(fm.width)) continue;
      const auto v = fm.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* row = w.raw() + ((dy * k + dx) * cin + ci) * cout;
        for (std::size_t c = 0; c < cout; ++c) out[c] += v[ci] * row[c];
      }
    }
  }
  return out;
}

// θ[b,k] = π(F[b,2k]·dy[b] + F[b,2k+1]·dx[b]) + P[b,k]
Var lattice_phase(Var freq, const std::vector<double>& dy, const std::vector<double>& dx, Var phases) {
  const Tensor& f = freq.value();
  const Tensor& p = phases.value();
  const std::size_t batch = p.extent(0), k = p.extent(1);
  if (f.extent(0) != batch || f.extent(1) != 2 * k) throw DimensionError("lattice_phase extents mismatch");
  constexpr double pi = std::numbers::pi;
  Tensor theta({batch, k});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < k; ++j) {
      theta[b * k + j] = pi * (f[b * 2 * k + 2 * j] * dy[b] + f[b * 2 * k + 2 * j + 1] * dx[b]) + p[b * k + j];
    }
  }
  return freq.tape()->record(std::move(theta), {freq, phases},
                             [freq, phases, dy, dx, batch, k](Tape& t, const Tensor& g, const Tensor&) {
                               if (freq.requires_grad()) {
                                 Tensor& acc = t.grad_accumulator(freq);
                                 for (std::size_t b = 0; b < batch; ++b) {
                                   for (std::size_t j = 0; j < k; ++j) {
                                     acc[b * 2 * k + 2 * j] += pi * dy[b] * g[b * k + j];
                                     acc[b * 2 * k + 2 * j + 1] += pi * dx[b] * g[b * k + j];
                                   }
                                 }
                               }
                               if (phases.requires_grad()) {
                                 Tensor& acc = t.grad_accumulator(phases);
                                 for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
                               }
                             });
}

}  // namespace

LatticeIndex nearest_index(std::size_t h, std::size_t w, Coord q) { return {nearest_axis(q.y, h), nearest_axis(q.x, w)}; }

NearestFeature nearest_feature(const FeatureMap& fm, Coord q) {
  if (fm.height == 0 || fm.width == 0) throw UsageError("nearest_feature on an empty feature map");
  NearestFeature out;
  out.index = nearest_index(fm.height, fm.width, q);
  out.center = lattice_center(out.index, fm.height, fm.width);
  const auto v = fm.at(out.index.row, out.index.col);
  out.feature.assign(v.begin(), v.end());
  return out;
}

void FourierBank::validate() const {
  if (amplitude.size() != 2 * frequencies || frequency.size() != 2 * frequencies || phase.size() != frequencies) {
    throw DimensionError("Fourier bank extents inconsistent with K = " + std::to_string(frequencies));
  }
}

std::vector<double> fourier_features(const FourierBank& bank, Coord delta) {
  bank.validate();
  const std::size_t k = bank.frequencies;
  std::vector<double> out(2 * k);
  for (std::size_t j = 0; j < k; ++j) {
    const double theta =
        std::numbers::pi * (bank.frequency[2 * j] * delta.y + bank.frequency[2 * j + 1] * delta.x) + bank.phase[j];
    out[j] = bank.amplitude[j] * std::cos(theta);
    out[k + j] = bank.amplitude[k + j] * std::sin(theta);
  }
  return out;
}

std::array<double, 4> ensemble_weights(Coord q, Coord top_left, Coord bottom_right) {
  auto fraction = [](double v, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  };
  const double ty = fraction(q.y, top_left.y, bottom_right.y);
  const double tx = fraction(q.x, top_left.x, bottom_right.x);
  return {(1.0 - ty) * (1.0 - tx), (1.0 - ty) * tx, ty * (1.0 - tx), ty * tx};
}

EnsembleNeighborhood ensemble_neighborhood(std::size_t h, std::size_t w, Coord q) {
  const std::size_t r0 = lower_corner(q.y, h), c0 = lower_corner(q.x, w);
  const std::size_t r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
  EnsembleNeighborhood n;
  const std::array<LatticeIndex, 4> idx{{{r0, c0}, {r0, c1}, {r1, c0}, {r1, c1}}};
  for (std::size_t j = 0; j < 4; ++j) {
    n.entries[j].index = idx[j];
    n.entries[j].center = lattice_center(idx[j], h, w);
  }
  const auto weights = ensemble_weights(q, n.entries[0].center, n.entries[3].center);
  for (std::size_t j = 0; j < 4; ++j) n.entries[j].weight = weights[j];
  for (std::size_t j = 1; j < 4; ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (n.entries[i].index == n.entries[j].index) {
        n.entries[i].weight += n.entries[j].weight;
        n.entries[j].weight = 0.0;
        break;
      }
    }
  }
  return n;
}

void init_implicit(ParamSet& params, const ModelConfig& cfg, std::mt19937_64& rng) {
  const std::size_t c = cfg.encoder.channels, k = cfg.frequencies;
  layers::init_conv(params, "ea", 3, c, 2 * k, rng);
  layers::init_conv(params, "ef", 3, c, 2 * k, rng);
  layers::init_linear(params, "ep.l1", 1, cfg.phase_hidden, rng);
  layers::init_linear(params, "ep.l2", cfg.phase_hidden, k, rng);
  layers::init_linear(params, "cond.l1", cfg.kappa_dim(), cfg.conditioner_width, rng);
  layers::init_linear(params, "cond.l2", cfg.conditioner_width, cfg.conditioner_width, rng);
  params.set("cond.out.w", Tensor({cfg.conditioner_width, cfg.conditioner_out()}));
  params.set("cond.out.b", Tensor({cfg.conditioner_out()}));
}

FourierBank estimate_bank(const FeatureMap& fm, LatticeIndex idx, double cell, const ParamSet& params,
                          const ModelConfig& cfg) {
  if (idx.row >= fm.height || idx.col >= fm.width) throw UsageError("lattice index outside the feature map");
  FourierBank bank;
  bank.frequencies = cfg.frequencies;
  bank.amplitude = conv_at(fm, idx, params, "ea");
  bank.frequency = conv_at(fm, idx, params, "ef");
  const double c[1] = {cell};
  bank.phase = dense(params, "ep.l2", dense(params, "ep.l1", c, true), false);
  bank.validate();
  return bank;
}

std::vector<double> fourier_feature_ensemble(const FeatureMap& fm, Coord q, double cell, const ParamSet& params,
                                             const ModelConfig& cfg, PassCounters* counters) {
  const EnsembleNeighborhood n = ensemble_neighborhood(fm.height, fm.width, q);
  std::vector<double> kappa;
  kappa.reserve(cfg.kappa_dim());
  for (const NeighborEntry& e : n.entries) {
    const FourierBank bank = estimate_bank(fm, e.index, cell, params, cfg);
    std::vector<double> f = fourier_features(bank, lattice_delta(q, e.center, fm.height, fm.width));
    if (cfg.weighting == EnsembleWeighting::full) {
      for (double& v : f) v *= e.weight;
    }
    kappa.insert(kappa.end(), f.begin(), f.end());
    if (counters) ++counters->estimator;
  }
  return kappa;
}

ConditionerOutput conditioner(std::span<const double> kappa, const ParamSet& params, const ModelConfig& cfg,
                              PassCounters* counters) {
  if (kappa.size() != cfg.kappa_dim()) throw DimensionError("conditioner input must have extent 8K");
  const auto h1 = dense(params, "cond.l1", kappa, true);
  const auto h2 = dense(params, "cond.l2", h1, true);
  const auto raw = dense(params, "cond.out", h2, false);
  if (counters) ++counters->conditioner;
  return ConditionerOutput::from_raw(raw, cfg.flow_layers, cfg.dim());
}

std::vector<double> fourier_ensemble_predict(const FeatureMap& fm, Coord q, double cell, const ParamSet& params,
                                             const ModelConfig& cfg, const FlowModel& flow,
                                             std::span<const double> z, PassCounters* counters) {
  const auto kappa = fourier_feature_ensemble(fm, q, cell, params, cfg, counters);
  const ConditionerOutput cond = conditioner(kappa, params, cfg, counters);
  if (counters) ++counters->flow;
  return flow.inverse(z, cond);
}

std::vector<double> local_ensemble_predict(const FeatureMap& fm, Coord q, double cell, const ParamSet& params,
                                           const ModelConfig& cfg, const FlowModel& flow,
                                           std::span<const double> z, PassCounters* counters) {
  const EnsembleNeighborhood n = ensemble_neighborhood(fm.height, fm.width, q);
  std::vector<double> patch(flow.dim(), 0.0);
  for (const NeighborEntry& e : n.entries) {
    const FourierBank bank = estimate_bank(fm, e.index, cell, params, cfg);
    if (counters) ++counters->estimator;
    const auto f = fourier_features(bank, lattice_delta(q, e.center, fm.height, fm.width));
    std::vector<double> kappa;
    kappa.reserve(cfg.kappa_dim());
    for (int slot = 0; slot < 4; ++slot) kappa.insert(kappa.end(), f.begin(), f.end());
    const ConditionerOutput cond = conditioner(kappa, params, cfg, counters);
    const auto p = flow.inverse(z, cond);
    if (counters) ++counters->flow;
    for (std::size_t d = 0; d < patch.size(); ++d) patch[d] += e.weight * p[d];
  }
  return patch;
}

void QueryBatch::add(std::size_t image, std::size_t h, std::size_t w, Coord q, double cell) {
  const EnsembleNeighborhood n = ensemble_neighborhood(h, w, q);
  for (std::size_t j = 0; j < 4; ++j) {
    const NeighborEntry& e = n.entries[j];
    rows[j].push_back((image * h + e.index.row) * w + e.index.col);
    const Coord d = lattice_delta(q, e.center, h, w);
    delta_y[j].push_back(d.y);
    delta_x[j].push_back(d.x);
    weights[j].push_back(e.weight);
  }
  cells.push_back(cell);
}

HeadMaps fourier_heads(const BoundParams& params, const ModelConfig& cfg, Var features) {
  const std::size_t rows = shape_size(features.shape()) / cfg.encoder.channels;
  const std::size_t width = 2 * cfg.frequencies;
  return {ad::reshape(layers::conv(params, "ea", features), {rows, width}),
          ad::reshape(layers::conv(params, "ef", features), {rows, width})};
}

Var phase_mlp(const BoundParams& params, Var cells) {
  const std::size_t b = cells.value().size();
  Var x = ad::reshape(cells, {b, 1});
  return layers::linear(params, "ep.l2", ad::relu(layers::linear(params, "ep.l1", x)));
}

Var neighbor_features(const HeadMaps& heads, Var phases, const QueryBatch& batch, std::size_t slot) {
  Var amp = ad::gather_rows(heads.amplitude, batch.rows[slot]);
  Var freq = ad::gather_rows(heads.frequency, batch.rows[slot]);
  Var theta = lattice_phase(freq, batch.delta_y[slot], batch.delta_x[slot], phases);
  return ad::mul(amp, ad::cos_sin(theta));
}

Var fourier_ensemble(const HeadMaps& heads, Var phases, const QueryBatch& batch, const ModelConfig& cfg) {
  Tape& tape = *heads.amplitude.tape();
  std::vector<Var> parts;
  for (std::size_t j = 0; j < 4; ++j) {
    Var f = neighbor_features(heads, phases, batch, j);
    if (cfg.weighting == EnsembleWeighting::full) {
      f = ad::mul_col(f, tape.constant(Tensor({batch.size()}, batch.weights[j])));
    }
    parts.push_back(f);
  }
  return ad::concat_cols(parts);
}

Var conditioner_raw(const BoundParams& params, Var kappa) {
  Var h = ad::relu(layers::linear(params, "cond.l1", kappa));
  h = ad::relu(layers::linear(params, "cond.l2", h));
  return layers::linear(params, "cond.out", h);
}

}  // namespace linf
