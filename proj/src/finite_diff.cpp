#include "linf/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "linf/errors.hpp"

namespace linf {

Tensor finite_diff_jacobian(const VectorFunction& f, const Tensor& x, double step) {
  std::vector<double> probe(x.data().begin(), x.data().end());
  const std::size_t d = probe.size();
  std::size_t m = 0;
  std::vector<double> jac;
  for (std::size_t j = 0; j < d; ++j) {
    const double orig = probe[j];
    probe[j] = orig + step;
    const std::vector<double> plus = f(probe);
    probe[j] = orig - step;
    const std::vector<double> minus = f(probe);
    probe[j] = orig;
    if (j == 0) {
      m = plus.size();
      jac.assign(m * d, 0.0);
    }
    if (plus.size() != m || minus.size() != m) throw DimensionError("finite_diff_jacobian: output length changed");
    for (std::size_t i = 0; i < m; ++i) jac[i * d + j] = (plus[i] - minus[i]) / (2.0 * step);
  }
  return Tensor({m, d}, std::move(jac));
}

Tensor finite_diff_gradient(const ScalarFunction& f, const Tensor& x, double step) {
  std::vector<double> probe(x.data().begin(), x.data().end());
  Tensor grad(x.shape());
  for (std::size_t j = 0; j < probe.size(); ++j) {
    const double orig = probe[j];
    probe[j] = orig + step;
    const double plus = f(probe);
    probe[j] = orig - step;
    const double minus = f(probe);
    probe[j] = orig;
    grad[j] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

double max_relative_error(const Tensor& a, const Tensor& b, double floor) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace linf
