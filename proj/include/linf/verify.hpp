#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace linf::verify {

enum class Level { fast, full };

struct OracleResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// max ‖inverse(forward(m)) − m‖∞ over `pairs` random (patch, condition) pairs, n ∈ {1, 3}.
OracleResult round_trip(std::size_t pairs, std::uint64_t seed);
/// Analytic log-det vs log|det| of the numeric Jacobian at D ∈ {3, 27}, plus input independence.
OracleResult logdet_jacobian(std::uint64_t seed);
/// log_prob vs the closed-form Gaussian of the affine flow on random micro-models.
OracleResult gaussian_equivalence(std::size_t models, std::uint64_t seed);
/// Stage-2 loss gradient of every parameter group vs central differences (C=8, K=4, L=3, n=1).
OracleResult gradient_audit(std::uint64_t seed);
/// Importance-sampled ∫ p dm for n = 1 on `conditions` random conditions.
OracleResult density_normalization(std::size_t conditions, std::size_t samples, std::uint64_t seed);
/// Diversity ratio between τ = 0.8 and τ = 0.4, and the τ = 0 output against the probed mean.
OracleResult temperature_law(std::size_t samples, std::uint64_t seed);
/// Conditioner and flow calls per query in both ensembles; agreement under identical neighbors.
OracleResult ensemble_economics(std::uint64_t seed);
/// Coverage mask and h = ⌈sH/n⌉ over random configurations.
OracleResult tiling(std::size_t configs, std::uint64_t seed);

/// The oracle suite at a level. `full` adds the normalization integral.
std::vector<OracleResult> run_suite(Level level, std::uint64_t seed,
                                    const std::function<void(const OracleResult&)>& on_result = {});

Level parse_level(const std::string& s);

}  // namespace linf::verify
