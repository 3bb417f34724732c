#pragma once

#include <cstdint>

#include "linf/flow.hpp"
#include "linf/implicit.hpp"
#include "linf/model_config.hpp"
#include "linf/params.hpp"

namespace linf {

/// Encoder + local implicit module + flow, as one parameter set.
struct LinfModel {
  ModelConfig config;
  ParamSet params;

  /// Deterministic initialisation from `seed`: identity-plus-noise flow and a
  /// zero conditioner output head, so a fresh model predicts zero texture.
  static LinfModel create(const ModelConfig& config, std::uint64_t seed);

  FlowModel flow() const { return FlowModel::from_params(params, config.flow_layers); }
  FeatureMap encode(const Image& lr) const { return linf::encode(lr, config.encoder, params); }
};

}  // namespace linf
