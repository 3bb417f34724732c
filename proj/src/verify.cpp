#include "linf/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "linf/corpus.hpp"
#include "linf/errors.hpp"
#include "linf/finite_diff.hpp"
#include "linf/flow.hpp"
#include "linf/implicit.hpp"
#include "linf/lu.hpp"
#include "linf/metrics.hpp"
#include "linf/model.hpp"
#include "linf/pipeline.hpp"
#include "linf/resample.hpp"
#include "linf/training.hpp"

namespace linf::verify {
namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

template <class Fn>
OracleResult timed(std::string name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  OracleResult r;
  try {
    r = fn();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<double> uniform_vector(std::size_t n, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

FlowModel random_flow(std::size_t dim, std::size_t layers, std::mt19937_64& rng) {
  const double a = 0.5 / std::sqrt(static_cast<double>(dim));
  std::vector<Tensor> w, b;
  for (std::size_t k = 0; k < layers; ++k) {
    Tensor wk({dim, dim}, uniform_vector(dim * dim, rng, a));
    for (std::size_t i = 0; i < dim; ++i) wk.at(i, i) += 1.0;
    w.push_back(std::move(wk));
    b.push_back(Tensor({dim}, uniform_vector(dim, rng, 0.5)));
  }
  return FlowModel(std::move(w), std::move(b));
}

ConditionerOutput random_condition(std::size_t dim, std::size_t layers, std::mt19937_64& rng, double range = 1.0) {
  return ConditionerOutput::from_raw(uniform_vector(2 * layers * dim, rng, range), layers, dim);
}

ModelConfig micro_config(std::size_t n) {
  ModelConfig cfg;
  cfg.patch_n = n;
  cfg.encoder.channels = 8;
  cfg.encoder.residual_blocks = 1;
  cfg.frequencies = 4;
  cfg.flow_layers = 3;
  cfg.conditioner_width = 16;
  cfg.phase_hidden = 8;
  return cfg;
}

/// Every parameter random; the flow stays near identity so it is well conditioned.
LinfModel random_micro_model(const ModelConfig& cfg, std::mt19937_64& rng, double head = 0.3) {
  LinfModel m = LinfModel::create(cfg, rng());
  for (auto& [name, t] : m.params) {
    if (name.rfind("flow.W", 0) == 0) {
      t = Tensor(t.shape(), uniform_vector(t.size(), rng, 0.2));
      for (std::size_t i = 0; i < t.extent(0); ++i) t.at(i, i) += 1.0;
    } else if (name.rfind("flow.b", 0) == 0) {
      t = Tensor(t.shape(), uniform_vector(t.size(), rng, 0.05));
    } else if (name.rfind("cond.out", 0) == 0) {
      t = Tensor(t.shape(), uniform_vector(t.size(), rng, head));
    }
  }
  return m;
}

Image uniform_image(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(h, w);
  for (double& v : img.data()) v = u(rng);
  return img;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Affine map probed column by column: z(m) = A (m − μ).
struct ProbedGaussian {
  Tensor a;
  std::vector<double> mean;
};

ProbedGaussian probe(const FlowModel& flow, const ConditionerOutput& cond) {
  const std::size_t d = flow.dim();
  const std::vector<double> origin(d, 0.0);
  const std::vector<double> z0 = flow.forward(origin, cond).z;
  ProbedGaussian g{Tensor({d, d}), {}};
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> e(d, 0.0);
    e[j] = 1.0;
    const auto zj = flow.forward(e, cond).z;
    for (std::size_t i = 0; i < d; ++i) g.a.at(i, j) = zj[i] - z0[i];
  }
  g.mean = z0;
  lu_factor(g.a).solve_in_place(g.mean);
  for (double& v : g.mean) v = -v;
  return g;
}

ConditionerOutput query_condition(const LinfModel& m, const FeatureMap& fm, Coord q, double cell) {
  return conditioner(fourier_feature_ensemble(fm, q, cell, m.params, m.config), m.params, m.config);
}

}  // namespace

OracleResult round_trip(std::size_t pairs, std::uint64_t seed) {
  return timed("round-trip", [&] {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    const std::size_t ns[] = {1, 3};
    for (std::size_t n : ns) {
      const std::size_t d = 3 * n * n, layers = 10;
      const FlowModel flow = random_flow(d, layers, rng);
      for (std::size_t i = 0; i < pairs; ++i) {
        const ConditionerOutput c = random_condition(d, layers, rng);
        const auto m = uniform_vector(d, rng, 1.0);
        worst = std::max(worst, max_abs_diff(flow.inverse(flow.forward(m, c).z, c), m));
      }
    }
    return OracleResult{{}, worst <= 1e-8, fmt("max |inverse(forward(m)) - m| = %.3g (bound 1e-8)", worst)};
  });
}

OracleResult logdet_jacobian(std::uint64_t seed) {
  return timed("log-det vs numeric Jacobian", [&] {
    std::mt19937_64 rng(seed);
    double rel = 0.0, spread = 0.0;
    for (std::size_t d : {3, 27}) {
      for (int rep = 0; rep < 5; ++rep) {
        const FlowModel flow = random_flow(d, 4, rng);
        const ConditionerOutput c = random_condition(d, 4, rng, 0.5);
        const auto m1 = uniform_vector(d, rng, 1.0), m2 = uniform_vector(d, rng, 1.0);
        const Tensor jac = finite_diff_jacobian([&](std::span<const double> m) { return flow.forward(m, c).z; },
                                                Tensor({d}, m1));
        const double numeric = lu_factor(jac).log_abs_det();
        const double a1 = flow.forward(m1, c).logdet, a2 = flow.forward(m2, c).logdet;
        rel = std::max(rel, std::abs(a1 - numeric) / std::max(std::abs(numeric), 1.0));
        spread = std::max({spread, std::abs(a1 - a2), std::abs(a1 - flow.analytic_logdet(c))});
      }
    }
    return OracleResult{{}, rel <= 1e-4 && spread <= 1e-12,
                        fmt("rel err %.3g (bound 1e-4), input dependence %.3g (bound 1e-12)", rel, spread)};
  });
}

OracleResult gaussian_equivalence(std::size_t models, std::uint64_t seed) {
  return timed("Gaussian closed form", [&] {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-1.0, 1.0), cell(0.5, 2.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < models; ++k) {
      const LinfModel m = random_micro_model(micro_config(1 + k % 2), rng);
      const FeatureMap fm = m.encode(uniform_image(4, 4, rng, 0.0, 1.0));
      const ConditionerOutput c = query_condition(m, fm, {coord(rng), coord(rng)}, cell(rng));
      const FlowModel flow = m.flow();
      const ProbedGaussian g = probe(flow, c);
      const auto x = uniform_vector(flow.dim(), rng, 0.5);
      std::vector<double> z(flow.dim(), 0.0);
      for (std::size_t i = 0; i < z.size(); ++i)
        for (std::size_t j = 0; j < z.size(); ++j) z[i] += g.a.at(i, j) * (x[j] - g.mean[j]);
      const double closed = standard_normal_log_density(z) + lu_factor(g.a).log_abs_det();
      worst = std::max(worst, std::abs(flow.log_prob(x, c) - closed));
    }
    return OracleResult{{}, worst <= 1e-6, fmt("max |log p - closed form| = %.3g (bound 1e-6)", worst)};
  });
}

OracleResult gradient_audit(std::uint64_t seed) {
  return timed("gradient audit", [&] {
    std::mt19937_64 rng(seed);
    const ModelConfig cfg = micro_config(1);
    const LinfModel model = random_micro_model(cfg, rng);
    TrainConfig t;
    t.lr_crop = 4;
    t.scale_max = 2.0;
    t.batch = 1;
    t.pairs_per_image = 6;
    t.stage = 2;
    const std::vector<Image> corpus = procedural_corpus(2, 16, seed);
    const TrainingBatch batch = make_batch(corpus, t, cfg.patch_n, rng);

    std::map<std::string, double> group_err;
    for (double lambda_nll : {5e-4, 1.0}) {
      t.lambda_nll = lambda_nll;
      Tape tape;
      BoundParams bound(tape, model.params, true);
      tape.backward(compute_loss(bound, cfg, batch, t).total);
      const ParamSet grads = bound.gradients();
      ParamSet probe_params = model.params;
      auto loss_at = [&] {
        Tape tp;
        return compute_loss(BoundParams(tp, probe_params, false), cfg, batch, t).value;
      };
      for (const auto& [name, p] : model.params) {
        Tensor numeric(p.shape());
        Tensor& slot = probe_params.get(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double orig = slot[i];
          slot[i] = orig + kFiniteDiffStep;
          const double up = loss_at();
          slot[i] = orig - kFiniteDiffStep;
          const double down = loss_at();
          slot[i] = orig;
          numeric[i] = (up - down) / (2.0 * kFiniteDiffStep);
        }
        const std::string group = name.substr(0, name.find('.'));
        double& e = group_err[group];
        e = std::max(e, max_relative_error(grads.get(name), numeric));
      }
    }
    double worst = 0.0;
    std::string detail;
    for (const auto& [g, e] : group_err) {
      worst = std::max(worst, e);
      detail += (detail.empty() ? "" : ", ") + g + " " + fmt("%.2g", e);
    }
    return OracleResult{{}, worst <= 1e-4, "rel err per group (bound 1e-4): " + detail};
  });
}

OracleResult density_normalization(std::size_t conditions, std::size_t samples, std::uint64_t seed) {
  return timed("density normalization", [&] {
    std::mt19937_64 rng(seed);
    const std::size_t d = 3, layers = 10;
    double worst = 0.0;
    for (std::size_t k = 0; k < conditions; ++k) {
      const FlowModel flow = random_flow(d, layers, rng);
      const ConditionerOutput c = random_condition(d, layers, rng, 0.3);
      // Proposal: Gaussian with 1.5x the empirical covariance of flow samples.
      const std::size_t pilot = 4000;
      std::vector<double> mu(d, 0.0), cov(d * d, 0.0);
      std::vector<std::vector<double>> xs;
      for (std::size_t i = 0; i < pilot; ++i) xs.push_back(flow.sample(c, 1.0, rng));
      for (const auto& x : xs)
        for (std::size_t j = 0; j < d; ++j) mu[j] += x[j] / pilot;
      for (const auto& x : xs)
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += 2.25 * (x[i] - mu[i]) * (x[j] - mu[j]) / pilot;
      std::vector<double> chol(d * d, 0.0);  // lower triangular
      double log_det_l = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          double v = cov[i * d + j];
          for (std::size_t k = 0; k < j; ++k) v -= chol[i * d + k] * chol[j * d + k];
          chol[i * d + j] = i == j ? std::sqrt(v) : v / chol[j * d + j];
        }
        log_det_l += std::log(chol[i * d + i]);
      }
      std::normal_distribution<double> normal(0.0, 1.0);
      double acc = 0.0;
      std::vector<double> x(d), e(d);
      for (std::size_t i = 0; i < samples; ++i) {
        double log_q = -log_det_l - 0.5 * d * std::log(2.0 * M_PI);
        for (std::size_t j = 0; j < d; ++j) {
          e[j] = normal(rng);
          log_q -= 0.5 * e[j] * e[j];
        }
        for (std::size_t r = 0; r < d; ++r) {
          x[r] = mu[r];
          for (std::size_t k = 0; k <= r; ++k) x[r] += chol[r * d + k] * e[k];
        }
        acc += std::exp(flow.log_prob(x, c) - log_q);
      }
      worst = std::max(worst, std::abs(acc / samples - 1.0));
    }
    return OracleResult{{}, worst <= 0.02, fmt("max |integral - 1| = %.4f (bound 0.02)", worst)};
  });
}

OracleResult temperature_law(std::size_t samples, std::uint64_t seed) {
  return timed("temperature law", [&] {
    std::mt19937_64 rng(seed);
    LinfModel m = random_micro_model(micro_config(1), rng, 0.1);
    // Shrink the texture spread to a trained model's scale so no sample reaches the clamp.
    {
      Tensor& b = m.params.get("cond.out.b");
      const std::size_t d = m.config.dim();
      for (std::size_t k = 0; k < m.config.flow_layers; ++k)
        for (std::size_t j = 0; j < d; ++j) b[2 * k * d + j] += 1.5;
    }
    const Image lr = uniform_image(2, 2, rng, 0.4, 0.6);
    const double scale = 2.0;
    auto draws = [&](double tau, std::uint64_t base) {
      std::vector<Image> out;
      bool clamped = false;
      for (std::size_t i = 0; i < samples; ++i) {
        SrOptions o;
        o.tau = tau;
        o.seed = base + i;
        o.threads = 1;
        out.push_back(super_resolve(lr, scale, m, o));
        for (double v : out.back().data()) clamped = clamped || v <= 0.0 || v >= 1.0;
      }
      if (clamped) throw Error("samples reached the clamp; linearity does not apply");
      return out;
    };
    const double ratio = diversity(draws(0.8, 1'000'000)) / diversity(draws(0.4, 2'000'000));

    // τ = 0 against the mean probed through forward passes on the per-query path.
    SrOptions o;
    const Image at_zero = super_resolve(lr, scale, m, o);
    const ScaleSpec spec = ScaleSpec::make(scale, lr.height(), lr.width());
    const PatchGrid grid = build_grid(spec, m.config.patch_n);
    const FeatureMap fm = m.encode(lr);
    const FlowModel flow = m.flow();
    Tensor patches({grid.patch_count(), grid.dim()});
    for (std::size_t i = 0; i < grid.rows; ++i) {
      for (std::size_t j = 0; j < grid.cols; ++j) {
        const auto g = probe(flow, query_condition(m, fm, grid.center(i, j), 2.0 / scale));
        std::copy(g.mean.begin(), g.mean.end(), patches.raw() + (i * grid.cols + j) * grid.dim());
      }
    }
    const Tensor texture = reassemble(patches, grid);
    Image expect = bilinear_upsample(lr, grid.target_h, grid.target_w);
    for (std::size_t i = 0; i < texture.size(); ++i) expect.data()[i] += texture[i];
    expect.clamp();
    const double mean_err = max_abs_diff(at_zero.data(), expect.data());
    const bool ok = std::abs(ratio - 2.0) <= 0.1 && mean_err <= 1e-9;
    return OracleResult{{}, ok,
                        fmt("diversity ratio %.4f (2 +/- 5%%), tau=0 vs probed mean %.3g (bound 1e-9)", ratio, mean_err)};
  });
}

OracleResult ensemble_economics(std::uint64_t seed) {
  return timed("ensemble passes and agreement", [&] {
    std::mt19937_64 rng(seed);
    const LinfModel m = random_micro_model(micro_config(2), rng);
    const Image lr = uniform_image(4, 5, rng, 0.0, 1.0);
    const PatchGrid g = build_grid(ScaleSpec::make(3.0, 4, 5), 2);
    PassCounters fourier, local;
    SrOptions o;
    o.counters = &fourier;
    (void)super_resolve(lr, 3.0, m, o);
    o.counters = &local;
    o.mode = EnsembleMode::local;
    (void)super_resolve(lr, 3.0, m, o);
    const std::uint64_t q = g.patch_count();
    const bool counts = fourier.conditioner == q && fourier.flow == q && local.conditioner == 4 * q && local.flow == 4 * q;

    ModelConfig cfg = micro_config(1);
    cfg.weighting = EnsembleWeighting::none;
    LinfModel same = random_micro_model(cfg, rng);
    // Constant amplitudes and zero frequencies: all four neighbor features coincide.
    same.params.get("ea.w").fill(0.0);
    same.params.get("ef.w").fill(0.0);
    same.params.get("ef.b").fill(0.0);
    const Image lr2 = uniform_image(5, 5, rng, 0.0, 1.0);
    SrOptions a;
    a.tau = 0.5;
    a.seed = seed;
    const Image fa = super_resolve(lr2, 2.0, same, a);
    a.mode = EnsembleMode::local;
    const double diff = max_abs_diff(fa.data(), super_resolve(lr2, 2.0, same, a).data());

    char buf[200];
    std::snprintf(buf, sizeof buf, "per query: fourier %.0f+%.0f, local %.0f+%.0f; agreement %.3g (bound 1e-9)",
                  static_cast<double>(fourier.conditioner) / q, static_cast<double>(fourier.flow) / q,
                  static_cast<double>(local.conditioner) / q, static_cast<double>(local.flow) / q, diff);
    return OracleResult{{}, counts && diff <= 1e-9, buf};
  });
}

OracleResult tiling(std::size_t configs, std::uint64_t seed) {
  return timed("tiling exactness", [&] {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> extent(1, 40);
    std::uniform_real_distribution<double> scale(1.0, 4.0);
    const std::size_t ns[] = {1, 2, 3, 5};
    std::size_t bad = 0, non_divisible = 0;
    for (std::size_t k = 0; k < configs; ++k) {
      const double s = scale(rng);
      const std::size_t h = extent(rng), w = extent(rng), n = ns[k % 4];
      const ScaleSpec spec = ScaleSpec::make(s, h, w);
      const PatchGrid grid = build_grid(spec, n);
      const auto ceil_div = [](std::size_t a, std::size_t b) { return (a + b - 1) / b; };
      const bool extents = spec.dst_h == static_cast<std::size_t>(std::llround(s * h)) &&
                           grid.rows == ceil_div(spec.dst_h, n) && grid.cols == ceil_div(spec.dst_w, n);
      const auto mask = coverage_mask(grid);
      const bool once = std::all_of(mask.begin(), mask.end(), [](int c) { return c == 1; });
      if (!extents || !once) ++bad;
      if (spec.dst_h % n || spec.dst_w % n) ++non_divisible;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu/%zu configurations wrong (%zu non-divisible)", bad, configs, non_divisible);
    return OracleResult{{}, bad == 0 && non_divisible > 0, buf};
  });
}

std::vector<OracleResult> run_suite(Level level, std::uint64_t seed,
                                    const std::function<void(const OracleResult&)>& on_result) {
  std::vector<OracleResult> out;
  auto add = [&](OracleResult r) {
    if (on_result) on_result(r);
    out.push_back(std::move(r));
  };
  add(round_trip(1000, seed + 1));
  add(logdet_jacobian(seed + 2));
  add(gaussian_equivalence(100, seed + 3));
  add(gradient_audit(seed + 4));
  add(tiling(50, seed + 5));
  add(ensemble_economics(seed + 6));
  add(temperature_law(level == Level::full ? 10000 : 2000, seed + 7));
  if (level == Level::full) add(density_normalization(10, 200000, seed + 8));
  return out;
}

Level parse_level(const std::string& s) {
  if (s == "fast") return Level::fast;
  if (s == "full") return Level::full;
  throw UsageError("verify level must be fast or full, got '" + s + "'");
}

}  // namespace linf::verify
