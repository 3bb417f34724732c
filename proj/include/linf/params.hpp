#pragma once

#include <map>
#include <random>
#include <string>

#include "linf/tape.hpp"
#include "linf/tensor.hpp"

namespace linf {

/// Named parameter tensors, iterated in name order.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  void set(const std::string& name, Tensor value) { tensors_[name] = std::move(value); }
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  /// Throws ConfigError naming the missing parameter.
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }
  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }
  std::size_t count() const { return tensors_.size(); }
  std::size_t element_count() const;

  friend bool operator==(const ParamSet&, const ParamSet&);

 private:
  Map tensors_;
};

/// A ParamSet placed on a tape for one evaluation. With `trainable`, every
/// parameter is a requires-grad leaf; otherwise a constant.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamSet& params, bool trainable);
  /// Binds existing variables by name, e.g. leaves owned by a gradient check.
  BoundParams(Tape& tape, std::map<std::string, Var> vars) : tape_(&tape), vars_(std::move(vars)) {}

  Var operator[](const std::string& name) const;
  Tape& tape() const { return *tape_; }

  /// Gradient of every parameter after Tape::backward (zeros where unreached).
  ParamSet gradients() const;

 private:
  Tape* tape_;
  std::map<std::string, Var> vars_;
};

/// PyTorch-default style uniform(±1/sqrt(fan_in)) initialisation.
Tensor uniform_fan_in(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace linf
