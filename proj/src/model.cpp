#include "linf/model.hpp"

#include <random>

#include "linf/errors.hpp"

namespace linf {

std::string to_string(EnsembleWeighting w) { return w == EnsembleWeighting::full ? "full" : "none"; }
std::string to_string(EnsembleMode m) { return m == EnsembleMode::fourier ? "fourier" : "local"; }

EnsembleWeighting parse_weighting(const std::string& s) {
  if (s == "full") return EnsembleWeighting::full;
  if (s == "none") return EnsembleWeighting::none;
  throw ConfigError("ensemble_weighting must be 'full' or 'none', got '" + s + "'");
}

EnsembleMode parse_ensemble_mode(const std::string& s) {
  if (s == "fourier") return EnsembleMode::fourier;
  if (s == "local") return EnsembleMode::local;
  throw ConfigError("ensemble mode must be 'fourier' or 'local', got '" + s + "'");
}

void ModelConfig::validate() const {
  encoder.validate();
  if (patch_n < 1) throw ConfigError("patch_n must be >= 1");
  if (frequencies < 1) throw ConfigError("frequencies must be >= 1");
  if (flow_layers < 1) throw ConfigError("flow_layers must be >= 1");
  if (conditioner_width < 1 || phase_hidden < 1) throw ConfigError("hidden widths must be >= 1");
}

LinfModel LinfModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  LinfModel m;
  m.config = config;
  std::mt19937_64 rng(seed);
  init_encoder(m.params, config.encoder, rng);
  init_implicit(m.params, config, rng);
  init_flow(m.params, config.dim(), config.flow_layers, rng);
  return m;
}

}  // namespace linf
