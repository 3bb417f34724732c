#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "linf/tensor.hpp"

namespace linf {

/// Partial-pivoting LU of a square matrix: P·A = L·U, with unit-diagonal L and U
/// stored in one D×D buffer. Row i of P·A is row perm[i] of A.
struct LuFactors {
  std::size_t n = 0;
  std::vector<double> lu;
  std::vector<std::size_t> perm;
  int sign = 1;

  double log_abs_det() const;
  /// Sign of det A (±1).
  int det_sign() const;

  void solve_in_place(std::span<double> b) const;
  /// Solves Aᵀ·x = b.
  void solve_transposed_in_place(std::span<double> b) const;
  Tensor inverse() const;

  Tensor lower() const;
  Tensor upper() const;
};

/// Throws SingularMatrixError when a pivot magnitude falls below `pivot_tolerance`,
/// DimensionError for non-square input.
LuFactors lu_factor(const Tensor& a, double pivot_tolerance = 1e-12);

}  // namespace linf
