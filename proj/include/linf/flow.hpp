#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "linf/lu.hpp"
#include "linf/params.hpp"

namespace linf {

/// Bound on the injector scale pre-activation; α = exp(clamp(α_pre)).
inline constexpr double kAlphaClamp = 8.0;

/// Per-layer injector parameters for one query, L×D row-major each.
struct ConditionerOutput {
  std::size_t layers = 0;
  std::size_t dim = 0;
  std::vector<double> alpha_pre;  // already clamped to [-kAlphaClamp, kAlphaClamp]
  std::vector<double> phi;

  static ConditionerOutput identity(std::size_t layers, std::size_t dim);
  /// Raw generator output of extent 2·L·D laid out as [α_pre_0, φ_0, α_pre_1, φ_1, ...].
  static ConditionerOutput from_raw(std::span<const double> raw, std::size_t layers, std::size_t dim);

  double alpha(std::size_t k, std::size_t d) const;
};

/// L (linear, affine-injector) pairs over D-dimensional patch vectors.
class FlowModel {
 public:
  struct Forward {
    std::vector<double> z;
    double logdet = 0.0;
  };

  /// Factorizes every weight; throws SingularMatrixError if one is singular.
  FlowModel(std::vector<Tensor> weights, std::vector<Tensor> biases);
  static FlowModel identity(std::size_t dim, std::size_t layers);
  /// Reads `flow.W<k>` / `flow.b<k>` for k < layers.
  static FlowModel from_params(const ParamSet& params, std::size_t layers);

  std::size_t dim() const { return dim_; }
  std::size_t layers() const { return weights_.size(); }
  const Tensor& weight(std::size_t k) const { return weights_[k]; }
  const Tensor& bias(std::size_t k) const { return biases_[k]; }

  Forward forward(std::span<const double> m, const ConditionerOutput& cond) const;
  std::vector<double> inverse(std::span<const double> z, const ConditionerOutput& cond) const;
  double log_prob(std::span<const double> m, const ConditionerOutput& cond) const;
  /// Σ log|det W_k| + Σ α_pre; does not depend on the input.
  double analytic_logdet(const ConditionerOutput& cond) const;
  /// z = τ·ε, ε ~ N(0, I); τ = 0 returns the mean without touching `rng`.
  std::vector<double> sample(const ConditionerOutput& cond, double tau, std::mt19937_64& rng) const;
  std::vector<double> mean(const ConditionerOutput& cond) const;

 private:
  void check(std::span<const double> v, const ConditionerOutput& cond) const;

  std::size_t dim_ = 0;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  std::vector<LuFactors> lu_;
  std::vector<double> logabsdet_;
};

/// W_k = I + N(0, noise²), β_k = 0.
void init_flow(ParamSet& params, std::size_t dim, std::size_t layers, std::mt19937_64& rng, double noise = 0.01);

/// Standard-normal log density, summed over components.
double standard_normal_log_density(std::span<const double> z);

/// Batched differentiable log p(targets | raw condition) -> [B].
Var flow_log_prob(const BoundParams& params, std::size_t layers, Var targets, Var raw_condition);
/// Batched differentiable inverse at z = 0 -> [B×D].
Var flow_mean(const BoundParams& params, std::size_t layers, Var raw_condition);

namespace testing {
/// Mutation hook for the verification suite: inverse solves with Wᵀ in place of W.
void set_transposed_inverse_fault(bool enabled);
bool transposed_inverse_fault();
}  // namespace testing

}  // namespace linf
