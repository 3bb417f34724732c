#pragma once

#include <functional>
#include <span>
#include <vector>

#include "linf/tensor.hpp"

namespace linf {

using VectorFunction = std::function<std::vector<double>(std::span<const double>)>;
using ScalarFunction = std::function<double(std::span<const double>)>;

inline constexpr double kFiniteDiffStep = 1e-5;

/// Central-difference Jacobian J[i][j] = ∂f_i/∂x_j, shape [M×D].
Tensor finite_diff_jacobian(const VectorFunction& f, const Tensor& x, double step = kFiniteDiffStep);

/// Central-difference gradient of a scalar function; same shape as `x`.
Tensor finite_diff_gradient(const ScalarFunction& f, const Tensor& x, double step = kFiniteDiffStep);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps near-zero entries
/// from dominating.
double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-6);

}  // namespace linf
