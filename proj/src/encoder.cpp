#include "linf/encoder.hpp"

#include <string>

#include "linf/errors.hpp"
#include "linf/layers.hpp"
#include "linf/ops.hpp"

namespace linf {
namespace {

std::string block_prefix(std::size_t i, int conv) {
  return "enc.block" + std::to_string(i) + ".conv" + std::to_string(conv);
}

void check_conv_shape(const ParamSet& params, const std::string& prefix, std::size_t k, std::size_t cin,
                      std::size_t cout) {
  const Shape want{k, k, cin, cout};
  if (params.get(prefix + ".w").shape() != want || params.get(prefix + ".b").size() != cout) {
    throw ConfigError("encoder parameter '" + prefix + "' does not match config (want " + shape_string(want) + ")");
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (channels < 8) throw ConfigError("encoder channels must be >= 8");
  if (residual_blocks < 1) throw ConfigError("encoder residual_blocks must be >= 1");
  if (kernel % 2 == 0) throw ConfigError("encoder kernel must be odd");
}

void init_encoder(ParamSet& params, const EncoderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t c = cfg.channels, k = cfg.kernel;
  layers::init_conv(params, "enc.head", k, 3, c, rng);
  for (std::size_t i = 0; i < cfg.residual_blocks; ++i) {
    layers::init_conv(params, block_prefix(i, 1), k, c, c, rng);
    layers::init_conv(params, block_prefix(i, 2), k, c, c, rng);
  }
  layers::init_conv(params, "enc.tail", k, c, c, rng);
}

Var encode(const BoundParams& params, const EncoderConfig& cfg, Var images) {
  cfg.validate();
  Var x = layers::conv(params, "enc.head", ad::add_scalar(images, -0.5));
  Var head = x;
  for (std::size_t i = 0; i < cfg.residual_blocks; ++i) {
    Var r = ad::relu(layers::conv(params, block_prefix(i, 1), x));
    x = ad::add(x, layers::conv(params, block_prefix(i, 2), r));
  }
  return ad::add(head, layers::conv(params, "enc.tail", x));
}

FeatureMap encode(const Image& img, const EncoderConfig& cfg, const ParamSet& params) {
  cfg.validate();
  check_conv_shape(params, "enc.head", cfg.kernel, 3, cfg.channels);
  for (std::size_t i = 0; i < cfg.residual_blocks; ++i) {
    check_conv_shape(params, block_prefix(i, 1), cfg.kernel, cfg.channels, cfg.channels);
    check_conv_shape(params, block_prefix(i, 2), cfg.kernel, cfg.channels, cfg.channels);
  }
  check_conv_shape(params, "enc.tail", cfg.kernel, cfg.channels, cfg.channels);
  Tape tape;
  BoundParams bound(tape, params, false);
  Tensor batch = img.to_tensor().reshaped({1, img.height(), img.width(), 3});
  Var out = encode(bound, cfg, tape.constant(std::move(batch)));
  FeatureMap fm;
  fm.height = img.height();
  fm.width = img.width();
  fm.channels = cfg.channels;
  fm.data.assign(out.value().data().begin(), out.value().data().end());
  return fm;
}

}  // namespace linf
