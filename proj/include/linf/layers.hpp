#pragma once

#include <random>
#include <string>

#include "linf/ops.hpp"
#include "linf/params.hpp"

namespace linf::layers {

/// `<prefix>.w` [in×out], `<prefix>.b` [out].
void init_linear(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng);
/// `<prefix>.w` [k×k×cin×cout], `<prefix>.b` [cout].
void init_conv(ParamSet& params, const std::string& prefix, std::size_t k, std::size_t cin, std::size_t cout,
               std::mt19937_64& rng);

/// x[B×in] -> [B×out]
Var linear(const BoundParams& p, const std::string& prefix, Var x);
/// NHWC -> NHWC, same padding.
Var conv(const BoundParams& p, const std::string& prefix, Var x);

}  // namespace linf::layers
