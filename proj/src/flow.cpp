#include "linf/flow.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "linf/errors.hpp"
#include "linf/ops.hpp"

namespace linf {
namespace {

bool g_transposed_inverse_fault = false;

std::string weight_name(std::size_t k) { return "flow.W" + std::to_string(k); }
std::string bias_name(std::size_t k) { return "flow.b" + std::to_string(k); }

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

namespace testing {
void set_transposed_inverse_fault(bool enabled) { g_transposed_inverse_fault = enabled; }
bool transposed_inverse_fault() { return g_transposed_inverse_fault; }
}  // namespace testing

ConditionerOutput ConditionerOutput::identity(std::size_t layers, std::size_t dim) {
  ConditionerOutput c;
  c.layers = layers;
  c.dim = dim;
  c.alpha_pre.assign(layers * dim, 0.0);
  c.phi.assign(layers * dim, 0.0);
  return c;
}

ConditionerOutput ConditionerOutput::from_raw(std::span<const double> raw, std::size_t layers, std::size_t dim) {
  if (raw.size() != 2 * layers * dim) throw DimensionError("conditioner output has the wrong extent");
  ConditionerOutput c = identity(layers, dim);
  for (std::size_t k = 0; k < layers; ++k) {
    for (std::size_t d = 0; d < dim; ++d) {
      c.alpha_pre[k * dim + d] = std::clamp(raw[2 * k * dim + d], -kAlphaClamp, kAlphaClamp);
      c.phi[k * dim + d] = raw[2 * k * dim + dim + d];
    }
  }
  return c;
}

double ConditionerOutput::alpha(std::size_t k, std::size_t d) const { return std::exp(alpha_pre[k * dim + d]); }

FlowModel::FlowModel(std::vector<Tensor> weights, std::vector<Tensor> biases)
    : weights_(std::move(weights)), biases_(std::move(biases)) {
  if (weights_.empty() || weights_.size() != biases_.size()) throw DimensionError("flow needs matching W/β per layer");
  dim_ = weights_[0].extent(0);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k].shape() != Shape{dim_, dim_} || biases_[k].size() != dim_) {
      throw DimensionError("flow layer " + std::to_string(k) + " has inconsistent extents");
    }
    lu_.push_back(lu_factor(weights_[k]));
    logabsdet_.push_back(lu_.back().log_abs_det());
  }
}

FlowModel FlowModel::identity(std::size_t dim, std::size_t layers) {
  std::vector<Tensor> w, b;
  for (std::size_t k = 0; k < layers; ++k) {
    w.push_back(Tensor::identity(dim));
    b.emplace_back(Shape{dim});
  }
  return FlowModel(std::move(w), std::move(b));
}

FlowModel FlowModel::from_params(const ParamSet& params, std::size_t layers) {
  std::vector<Tensor> w, b;
  for (std::size_t k = 0; k < layers; ++k) {
    w.push_back(params.get(weight_name(k)));
    b.push_back(params.get(bias_name(k)));
  }
  return FlowModel(std::move(w), std::move(b));
}

void FlowModel::check(std::span<const double> v, const ConditionerOutput& cond) const {
  if (v.size() != dim_) throw DimensionError("flow input has extent " + std::to_string(v.size()) + ", expected " +
                                             std::to_string(dim_));
  if (cond.dim != dim_ || cond.layers != layers()) throw DimensionError("condition does not match flow layout");
}

FlowModel::Forward FlowModel::forward(std::span<const double> m, const ConditionerOutput& cond) const {
  check(m, cond);
  Forward out;
  std::vector<double> h(m.begin(), m.end()), next(dim_);
  for (std::size_t k = 0; k < layers(); ++k) {
    const Tensor& w = weights_[k];
    for (std::size_t i = 0; i < dim_; ++i) {
      double s = biases_[k][i];
      for (std::size_t j = 0; j < dim_; ++j) s += w.at(i, j) * h[j];
      next[i] = s;
    }
    out.logdet += logabsdet_[k];
    for (std::size_t d = 0; d < dim_; ++d) {
      const double a = cond.alpha_pre[k * dim_ + d];
      h[d] = std::exp(a) * next[d] + cond.phi[k * dim_ + d];
      out.logdet += a;
    }
  }
  out.z = std::move(h);
  return out;
}

std::vector<double> FlowModel::inverse(std::span<const double> z, const ConditionerOutput& cond) const {
  check(z, cond);
  std::vector<double> h(z.begin(), z.end());
  for (std::size_t k = layers(); k-- > 0;) {
    for (std::size_t d = 0; d < dim_; ++d) {
      h[d] = (h[d] - cond.phi[k * dim_ + d]) / std::exp(cond.alpha_pre[k * dim_ + d]);
      h[d] -= biases_[k][d];
    }
    if (g_transposed_inverse_fault) {
      lu_[k].solve_transposed_in_place(h);
    } else {
      lu_[k].solve_in_place(h);
    }
  }
  return h;
}

double FlowModel::analytic_logdet(const ConditionerOutput& cond) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < layers(); ++k) {
    acc += logabsdet_[k];
    for (std::size_t d = 0; d < dim_; ++d) acc += cond.alpha_pre[k * dim_ + d];
  }
  return acc;
}

double standard_normal_log_density(std::span<const double> z) {
  double acc = 0.0;
  for (double v : z) acc += -0.5 * v * v - kHalfLog2Pi;
  return acc;
}

double FlowModel::log_prob(std::span<const double> m, const ConditionerOutput& cond) const {
  const Forward f = forward(m, cond);
  return standard_normal_log_density(f.z) + f.logdet;
}

std::vector<double> FlowModel::sample(const ConditionerOutput& cond, double tau, std::mt19937_64& rng) const {
  if (tau < 0.0) throw UsageError("temperature must be non-negative");
  std::vector<double> z(dim_, 0.0);
  if (tau > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : z) v = tau * normal(rng);
  }
  return inverse(z, cond);
}

std::vector<double> FlowModel::mean(const ConditionerOutput& cond) const {
  const std::vector<double> zero(dim_, 0.0);
  return inverse(zero, cond);
}

void init_flow(ParamSet& params, std::size_t dim, std::size_t layers, std::mt19937_64& rng, double noise) {
  std::normal_distribution<double> normal(0.0, noise);
  for (std::size_t k = 0; k < layers; ++k) {
    Tensor w = Tensor::identity(dim);
    for (double& v : w.data()) v += normal(rng);
    params.set(weight_name(k), std::move(w));
    params.set(bias_name(k), Tensor({dim}));
  }
}

Var flow_log_prob(const BoundParams& params, std::size_t layers, Var targets, Var raw_condition) {
  const std::size_t batch = targets.value().extent(0);
  const std::size_t dim = targets.value().extent(1);
  if (raw_condition.value().extent(0) != batch || raw_condition.value().extent(1) != 2 * layers * dim) {
    throw DimensionError("flow_log_prob: condition extents do not match targets");
  }
  Var h = targets;
  Var per_sample;
  Var weight_logdet;
  for (std::size_t k = 0; k < layers; ++k) {
    Var w = params[weight_name(k)];
    h = ad::add_row(ad::matmul(h, ad::transpose(w)), params[bias_name(k)]);
    Var ld = ad::logabsdet(w);
    weight_logdet = weight_logdet.valid() ? ad::add(weight_logdet, ld) : ld;
    Var a = ad::clamp(ad::slice_cols(raw_condition, 2 * k * dim, 2 * k * dim + dim), -kAlphaClamp, kAlphaClamp);
    Var phi = ad::slice_cols(raw_condition, 2 * k * dim + dim, 2 * (k + 1) * dim);
    h = ad::add(ad::mul(ad::exp(a), h), phi);
    Var a_sum = ad::sum_rows(a);
    per_sample = per_sample.valid() ? ad::add(per_sample, a_sum) : a_sum;
  }
  Var prior = ad::add_scalar(ad::scale(ad::sum_rows(ad::square(h)), -0.5), -static_cast<double>(dim) * kHalfLog2Pi);
  return ad::add(ad::add(prior, per_sample), ad::broadcast_scalar(weight_logdet, {batch}));
}

Var flow_mean(const BoundParams& params, std::size_t layers, Var raw_condition) {
  const std::size_t dim = raw_condition.value().extent(1) / (2 * layers);
  Var h;
  for (std::size_t k = layers; k-- > 0;) {
    Var a = ad::clamp(ad::slice_cols(raw_condition, 2 * k * dim, 2 * k * dim + dim), -kAlphaClamp, kAlphaClamp);
    Var phi = ad::slice_cols(raw_condition, 2 * k * dim + dim, 2 * (k + 1) * dim);
    Var shifted = h.valid() ? ad::sub(h, phi) : ad::neg(phi);
    h = ad::mul(shifted, ad::exp(ad::neg(a)));
    Var w_inv = ad::inverse(params[weight_name(k)]);
    h = ad::matmul(ad::add_row(h, ad::neg(params[bias_name(k)])), ad::transpose(w_inv));
  }
  return h;
}

}  // namespace linf
