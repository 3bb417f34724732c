#pragma once

#include <random>
#include <vector>

#include "linf/flow.hpp"
#include "oracles.hpp"

namespace linf::oracle {

/// Well-conditioned random flow: W = I + U(±0.3), β ~ U(±0.5).
inline FlowModel random_flow(std::size_t dim, std::size_t layers, std::mt19937_64& rng) {
  std::vector<Tensor> w, b;
  for (std::size_t k = 0; k < layers; ++k) {
    Tensor wk = random_tensor({dim, dim}, rng, -0.3, 0.3);
    for (std::size_t i = 0; i < dim; ++i) wk.at(i, i) += 1.0;
    w.push_back(std::move(wk));
    b.push_back(random_tensor({dim}, rng, -0.5, 0.5));
  }
  return FlowModel(std::move(w), std::move(b));
}

inline std::vector<double> random_raw_condition(std::size_t dim, std::size_t layers, std::mt19937_64& rng,
                                                double alpha_range = 0.5) {
  std::uniform_real_distribution<double> a(-alpha_range, alpha_range), p(-0.5, 0.5);
  std::vector<double> raw(2 * layers * dim);
  for (std::size_t k = 0; k < layers; ++k) {
    for (std::size_t d = 0; d < dim; ++d) {
      raw[2 * k * dim + d] = a(rng);
      raw[2 * k * dim + dim + d] = p(rng);
    }
  }
  return raw;
}

inline ConditionerOutput random_condition(std::size_t dim, std::size_t layers, std::mt19937_64& rng,
                                          double alpha_range = 0.5) {
  return ConditionerOutput::from_raw(random_raw_condition(dim, layers, rng, alpha_range), layers, dim);
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

/// Closed-form Gaussian log density of the affine flow: mean from inverse(0),
/// forward Jacobian probed column by column around the mean.
inline double gaussian_closed_form(const FlowModel& flow, const ConditionerOutput& cond, std::span<const double> m) {
  const std::size_t d = flow.dim();
  const std::vector<double> mu = flow.mean(cond);
  const std::vector<double> z0 = flow.forward(mu, cond).z;
  Tensor a({d, d});
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> e = mu;
    e[j] += 1.0;
    const auto zj = flow.forward(e, cond).z;
    for (std::size_t i = 0; i < d; ++i) a.at(i, j) = zj[i] - z0[i];
  }
  // log N(A(m − μ); 0, I) + log|det A|
  std::vector<double> z(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) z[i] += a.at(i, j) * (m[j] - mu[j]);
  return standard_normal_log_density(z) + lu_factor(a).log_abs_det();
}

}  // namespace linf::oracle
