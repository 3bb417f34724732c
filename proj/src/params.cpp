#include "linf/params.hpp"

#include <cmath>

#include "linf/errors.hpp"

namespace linf {

const Tensor& ParamSet::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

std::size_t ParamSet::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.tensors_.size() != b.tensors_.size()) return false;
  for (auto ia = a.tensors_.begin(), ib = b.tensors_.begin(); ia != a.tensors_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape() != ib->second.shape()) return false;
    for (std::size_t i = 0; i < ia->second.size(); ++i) {
      if (ia->second[i] != ib->second[i]) return false;
    }
  }
  return true;
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params, bool trainable) : tape_(&tape) {
  for (const auto& [name, value] : params) {
    vars_.emplace(name, trainable ? tape.leaf(value) : tape.constant(value));
  }
}

Var BoundParams::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

ParamSet BoundParams::gradients() const {
  ParamSet out;
  for (const auto& [name, var] : vars_) {
    const Tensor* g = tape_->grad(var);
    out.set(name, g ? *g : Tensor(var.value().shape()));
  }
  return out;
}

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace linf
