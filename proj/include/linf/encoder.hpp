#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "linf/image.hpp"
#include "linf/params.hpp"

namespace linf {

struct EncoderConfig {
  std::size_t channels = 64;
  std::size_t residual_blocks = 4;
  std::size_t kernel = 3;

  /// Throws ConfigError unless channels >= 8, residual_blocks >= 1 and kernel is odd.
  void validate() const;
};

/// Encoder output: one C-vector per LR pixel, row-major HWC.
struct FeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  std::span<const double> at(std::size_t y, std::size_t x) const {
    return std::span<const double>(data).subspan((y * width + x) * channels, channels);
  }
};

/// Adds `enc.*` parameters: head conv (3→C), R residual blocks, tail conv.
void init_encoder(ParamSet& params, const EncoderConfig& cfg, std::mt19937_64& rng);

/// Images [N×H×W×3] in [0,1] -> features [N×H×W×C]. Inputs are shifted to [-0.5, 0.5]
/// before the head conv; the tail output is added to the head output.
Var encode(const BoundParams& params, const EncoderConfig& cfg, Var images);

FeatureMap encode(const Image& img, const EncoderConfig& cfg, const ParamSet& params);

}  // namespace linf
