#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <string>

#include "linf/encoder.hpp"

namespace linf {

/// How neighbor features enter the ensemble: scaled by their bilinear weight, or not.
enum class EnsembleWeighting { full, none };
/// One conditioner/flow pass on the concatenated features, or four blended passes.
enum class EnsembleMode { fourier, local };

std::string to_string(EnsembleWeighting w);
std::string to_string(EnsembleMode m);
EnsembleWeighting parse_weighting(const std::string& s);
EnsembleMode parse_ensemble_mode(const std::string& s);

/// Layer order inside each flow pair; recorded in checkpoints.
inline constexpr const char* kFlowLayerOrder = "linear,injector";

struct ModelConfig {
  std::size_t patch_n = 1;
  std::size_t frequencies = 16;  // K
  std::size_t flow_layers = 10;  // L
  std::size_t conditioner_width = 256;
  std::size_t phase_hidden = 32;
  EncoderConfig encoder;
  EnsembleWeighting weighting = EnsembleWeighting::full;

  std::size_t dim() const { return 3 * patch_n * patch_n; }
  std::size_t kappa_dim() const { return 8 * frequencies; }
  std::size_t conditioner_out() const { return 2 * flow_layers * dim(); }

  void validate() const;
};

/// Per-query invocation counts of the estimator, conditioner, and flow.
struct PassCounters {
  std::atomic<std::uint64_t> estimator{0};
  std::atomic<std::uint64_t> conditioner{0};
  std::atomic<std::uint64_t> flow{0};

  void reset() {
    estimator = 0;
    conditioner = 0;
    flow = 0;
  }
};

}  // namespace linf
