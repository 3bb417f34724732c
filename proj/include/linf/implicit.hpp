#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "linf/encoder.hpp"
#include "linf/flow.hpp"
#include "linf/model_config.hpp"
#include "linf/params.hpp"

namespace linf {

/// Point in the continuous image domain [-1,1]², (row, column) order.
struct Coord {
  double y = 0.0;
  double x = 0.0;
};

struct LatticeIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const LatticeIndex&, const LatticeIndex&) = default;
};

inline Coord lattice_center(LatticeIndex idx, std::size_t h, std::size_t w) {
  return {pixel_center(idx.row, h), pixel_center(idx.col, w)};
}

/// Query-minus-neighbor offset in LR lattice units (one LR pixel spans 2), so the
/// estimator sees the same offsets regardless of the feature map's extents.
inline Coord lattice_delta(Coord q, Coord center, std::size_t h, std::size_t w) {
  return {(q.y - center.y) * static_cast<double>(h), (q.x - center.x) * static_cast<double>(w)};
}

/// Closest LR pixel center to `q`; equidistant ties go to the smaller index.
LatticeIndex nearest_index(std::size_t h, std::size_t w, Coord q);

struct NearestFeature {
  LatticeIndex index;
  Coord center;
  std::vector<double> feature;
};
NearestFeature nearest_feature(const FeatureMap& fm, Coord q);

/// Amplitudes A (2K), frequencies F (K×2, (y, x) per row), phases P (K).
struct FourierBank {
  std::size_t frequencies = 0;
  std::vector<double> amplitude;
  std::vector<double> frequency;
  std::vector<double> phase;

  void validate() const;
};

/// A ⊙ [cos θ; sin θ] with θ_k = π⟨F_k, delta⟩ + P_k.
std::vector<double> fourier_features(const FourierBank& bank, Coord delta);

struct NeighborEntry {
  LatticeIndex index;
  Coord center;
  double weight = 0.0;
};

/// The four lattice points around a query, ordered top-left, top-right,
/// bottom-left, bottom-right.
struct EnsembleNeighborhood {
  std::array<NeighborEntry, 4> entries;
};

/// Bilinear weights of `q` inside the axis-aligned cell spanned by `top_left` and
/// `bottom_right`: each weight is the area opposite its corner, normalised to sum 1.
/// `q` is clamped into the cell; a zero-extent axis splits its weight onto the first corner.
std::array<double, 4> ensemble_weights(Coord q, Coord top_left, Coord bottom_right);

/// Lattice cell around `q`, clamped to the image. Duplicate entries (a 1-pixel axis)
/// have their weights merged onto the first occurrence.
EnsembleNeighborhood ensemble_neighborhood(std::size_t h, std::size_t w, Coord q);

/// Adds E_a, E_f (3×3 convs C→2K), E_p (1→hidden→K MLP), and the conditioner trunk
/// (κ→width→width→2·L·D). The conditioner's output layer starts at zero.
void init_implicit(ParamSet& params, const ModelConfig& cfg, std::mt19937_64& rng);

FourierBank estimate_bank(const FeatureMap& fm, LatticeIndex idx, double cell, const ParamSet& params,
                          const ModelConfig& cfg);

/// Weighted features of the four neighbors concatenated in neighborhood order, 8K.
std::vector<double> fourier_feature_ensemble(const FeatureMap& fm, Coord q, double cell, const ParamSet& params,
                                             const ModelConfig& cfg, PassCounters* counters = nullptr);

ConditionerOutput conditioner(std::span<const double> kappa, const ParamSet& params, const ModelConfig& cfg,
                              PassCounters* counters = nullptr);

/// Single-pass prediction: flow inverse of `z` under the conditioner applied to κ.
std::vector<double> fourier_ensemble_predict(const FeatureMap& fm, Coord q, double cell, const ParamSet& params,
                                             const ModelConfig& cfg, const FlowModel& flow,
                                             std::span<const double> z, PassCounters* counters = nullptr);

/// Four-pass comparison path: each neighbor's unweighted features, replicated into
/// every κ slot, are decoded separately and the four patches are blended with the
/// bilinear weights.
std::vector<double> local_ensemble_predict(const FeatureMap& fm, Coord q, double cell, const ParamSet& params,
                                           const ModelConfig& cfg, const FlowModel& flow,
                                           std::span<const double> z, PassCounters* counters = nullptr);

/// Batched queries against an NHWC feature batch, for the taped path.
struct QueryBatch {
  std::size_t size() const { return cells.size(); }

  /// Appends one query on image `image` of a batch whose maps are h×w.
  void add(std::size_t image, std::size_t h, std::size_t w, Coord q, double cell);

  std::array<std::vector<std::size_t>, 4> rows;  // flat row into the [N·H·W × ·] head maps
  std::array<std::vector<double>, 4> delta_y;
  std::array<std::vector<double>, 4> delta_x;
  std::array<std::vector<double>, 4> weights;
  std::vector<double> cells;
};

/// E_a and E_f applied to every feature position: two [(N·H·W) × 2K] matrices.
struct HeadMaps {
  Var amplitude;
  Var frequency;
};
HeadMaps fourier_heads(const BoundParams& params, const ModelConfig& cfg, Var features);

/// E_p on cells [B] -> [B×K].
Var phase_mlp(const BoundParams& params, Var cells);

/// Unweighted features of neighbor slot `slot` for every query, [B×2K].
Var neighbor_features(const HeadMaps& heads, Var phases, const QueryBatch& batch, std::size_t slot);

/// κ for every query, [B×8K].
Var fourier_ensemble(const HeadMaps& heads, Var phases, const QueryBatch& batch, const ModelConfig& cfg);

/// Conditioner MLP, [B×8K] -> raw [B×2LD] (α_pre unclamped).
Var conditioner_raw(const BoundParams& params, Var kappa);

}  // namespace linf
