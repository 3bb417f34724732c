#include "linf/lu.hpp"

#include <cmath>
#include <numeric>
#include <utility>

#include "linf/errors.hpp"

namespace linf {

LuFactors lu_factor(const Tensor& a, double pivot_tolerance) {
  if (a.rank() != 2 || a.extent(0) != a.extent(1) || a.extent(0) == 0) {
    throw DimensionError("lu_factor needs a non-empty square matrix, got " + shape_string(a.shape()));
  }
  LuFactors f;
  f.n = a.extent(0);
  const std::size_t n = f.n;
  f.lu.assign(a.data().begin(), a.data().end());
  f.perm.resize(n);
  std::iota(f.perm.begin(), f.perm.end(), std::size_t{0});
  auto m = [&](std::size_t r, std::size_t c) -> double& { return f.lu[r * n + c]; };

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(m(k, k));
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(m(r, k)) > best) {
        best = std::abs(m(r, k));
        pivot = r;
      }
    }
    if (!(best >= pivot_tolerance)) {
      throw SingularMatrixError("matrix is singular: pivot " + std::to_string(best) + " at column " +
                                std::to_string(k));
    }
    if (pivot != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m(k, c), m(pivot, c));
      std::swap(f.perm[k], f.perm[pivot]);
      f.sign = -f.sign;
    }
    const double inv = 1.0 / m(k, k);
    for (std::size_t r = k + 1; r < n; ++r) {
      const double l = m(r, k) * inv;
      m(r, k) = l;
      if (l == 0.0) continue;
      for (std::size_t c = k + 1; c < n; ++c) m(r, c) -= l * m(k, c);
    }
  }
  return f;
}

double LuFactors::log_abs_det() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::log(std::abs(lu[i * n + i]));
  return acc;
}

int LuFactors::det_sign() const {
  int s = sign;
  for (std::size_t i = 0; i < n; ++i) {
    if (lu[i * n + i] < 0) s = -s;
  }
  return s;
}

void LuFactors::solve_in_place(std::span<double> b) const {
  if (b.size() != n) throw DimensionError("LU solve: rhs length mismatch");
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = b[perm[i]];
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu[i * n + j] * y[j];
    y[i] = s;
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu[i * n + j] * y[j];
    y[i] = s / lu[i * n + i];
  }
  std::copy(y.begin(), y.end(), b.begin());
}

void LuFactors::solve_transposed_in_place(std::span<double> b) const {
  // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ w = b, Lᵀ v = w, then x = Pᵀ v.
  if (b.size() != n) throw DimensionError("LU solve: rhs length mismatch");
  std::vector<double> w(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = w[i];
    for (std::size_t j = 0; j < i; ++j) s -= lu[j * n + i] * w[j];
    w[i] = s / lu[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = w[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= lu[j * n + i] * w[j];
    w[i] = s;
  }
  for (std::size_t i = 0; i < n; ++i) b[perm[i]] = w[i];
}

Tensor LuFactors::inverse() const {
  Tensor inv({n, n});
  std::vector<double> col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    solve_in_place(col);
    for (std::size_t i = 0; i < n; ++i) inv.at(i, j) = col[i];
  }
  return inv;
}

Tensor LuFactors::lower() const {
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) l.at(i, j) = lu[i * n + j];
    l.at(i, i) = 1.0;
  }
  return l;
}

Tensor LuFactors::upper() const {
  Tensor u({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) u.at(i, j) = lu[i * n + j];
  }
  return u;
}

}  // namespace linf
