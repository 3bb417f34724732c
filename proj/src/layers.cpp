#include "linf/layers.hpp"

namespace linf::layers {

void init_linear(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  params.set(prefix + ".w", uniform_fan_in({in, out}, in, rng));
  params.set(prefix + ".b", uniform_fan_in({out}, in, rng));
}

void init_conv(ParamSet& params, const std::string& prefix, std::size_t k, std::size_t cin, std::size_t cout,
               std::mt19937_64& rng) {
  params.set(prefix + ".w", uniform_fan_in({k, k, cin, cout}, k * k * cin, rng));
  params.set(prefix + ".b", uniform_fan_in({cout}, k * k * cin, rng));
}

Var linear(const BoundParams& p, const std::string& prefix, Var x) {
  return ad::add_row(ad::matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

Var conv(const BoundParams& p, const std::string& prefix, Var x) {
  Var y = ad::conv2d(x, p[prefix + ".w"]);
  const Shape shape = y.shape();
  const std::size_t cout = shape.back();
  Var flat = ad::reshape(y, {shape_size(shape) / cout, cout});
  return ad::reshape(ad::add_row(flat, p[prefix + ".b"]), shape);
}

}  // namespace linf::layers
