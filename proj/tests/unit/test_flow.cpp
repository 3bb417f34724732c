#include <cmath>
#include <random>

#include "doctest.h"
#include "flow_fixtures.hpp"
#include "gradcheck.hpp"
#include "linf/errors.hpp"
#include "linf/finite_diff.hpp"
#include "linf/flow.hpp"

using namespace linf;
using namespace linf::oracle;

namespace {
double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ParamSet flow_params(const FlowModel& f) {
  ParamSet p;
  for (std::size_t k = 0; k < f.layers(); ++k) {
    p.set("flow.W" + std::to_string(k), f.weight(k));
    p.set("flow.b" + std::to_string(k), f.bias(k));
  }
  return p;
}
}  // namespace

TEST_SUITE("flow") {
  TEST_CASE("round trip m -> z -> m") {
    std::mt19937_64 rng(1);
    for (std::size_t n : {1, 3}) {
      const std::size_t d = 3 * n * n;
      for (int s = 0; s < 50; ++s) {
        const FlowModel flow = random_flow(d, 4, rng);
        const ConditionerOutput c = random_condition(d, 4, rng);
        const auto m = random_vector(d, rng);
        CHECK(max_diff(flow.inverse(flow.forward(m, c).z, c), m) <= 1e-8);
        const auto z = random_vector(d, rng);
        CHECK(max_diff(flow.forward(flow.inverse(z, c), c).z, z) <= 1e-8);
      }
    }
  }
  TEST_CASE("log-det matches the numeric Jacobian and is input independent") {
    std::mt19937_64 rng(2);
    for (std::size_t d : {3, 27}) {
      const FlowModel flow = random_flow(d, 3, rng);
      const ConditionerOutput c = random_condition(d, 3, rng);
      const Tensor x({d}, random_vector(d, rng));
      const Tensor j = finite_diff_jacobian(
          [&](std::span<const double> m) { return flow.forward(m, c).z; }, x);
      const double numeric = lu_factor(j).log_abs_det();
      const double analytic = flow.forward(x.data(), c).logdet;
      CHECK(std::abs(analytic - numeric) <= 1e-4 * std::max(1.0, std::abs(numeric)));
      CHECK(analytic == flow.analytic_logdet(c));
      const auto other = random_vector(d, rng, 3.0);
      CHECK(std::abs(flow.forward(other, c).logdet - analytic) <= 1e-12);
    }
  }
  TEST_CASE("log_prob equals the closed-form Gaussian") {
    std::mt19937_64 rng(3);
    for (int s = 0; s < 30; ++s) {
      const std::size_t d = (s % 2) ? 3 : 12;
      const FlowModel flow = random_flow(d, 3, rng);
      const ConditionerOutput c = random_condition(d, 3, rng);
      const auto m = random_vector(d, rng);
      CHECK(std::abs(flow.log_prob(m, c) - gaussian_closed_form(flow, c, m)) <= 1e-6);
    }
  }
  TEST_CASE("identity flow is the standard normal") {
    const FlowModel flow = FlowModel::identity(3, 2);
    const auto c = ConditionerOutput::identity(2, 3);
    const std::vector<double> m{0.1, -0.2, 0.3};
    CHECK(flow.log_prob(m, c) == doctest::Approx(standard_normal_log_density(m)));
    CHECK(standard_normal_log_density(std::vector<double>{0.0}) == doctest::Approx(-0.9189385332046727));
  }
  TEST_CASE("temperature scales deviations from the mean exactly") {
    std::mt19937_64 rng(4);
    const FlowModel flow = random_flow(3, 3, rng);
    const ConditionerOutput c = random_condition(3, 3, rng);
    const auto mu = flow.mean(c);
    std::mt19937_64 a(9), b(9);
    const auto s8 = flow.sample(c, 0.8, a), s4 = flow.sample(c, 0.4, b);
    for (std::size_t i = 0; i < 3; ++i) CHECK(s8[i] - mu[i] == doctest::Approx(2.0 * (s4[i] - mu[i])).epsilon(1e-9));
    std::mt19937_64 untouched(5), reference(5);
    CHECK(max_diff(flow.sample(c, 0.0, untouched), mu) == 0.0);
    CHECK(untouched() == reference());
    CHECK_THROWS_AS(flow.sample(c, -0.1, untouched), UsageError);
  }
  TEST_CASE("conditioner layout and clamping") {
    std::vector<double> raw{20.0, -20.0, 1.0, 2.0, 0.5, 0.25, 3.0, 4.0};
    const auto c = ConditionerOutput::from_raw(raw, 2, 2);
    CHECK(c.alpha_pre[0] == kAlphaClamp);
    CHECK(c.alpha_pre[1] == -kAlphaClamp);
    CHECK(c.phi[0] == 1.0);
    CHECK(c.phi[1] == 2.0);
    CHECK(c.alpha_pre[2] == 0.5);
    CHECK(c.phi[3] == 4.0);
    CHECK(c.alpha(1, 1) == doctest::Approx(std::exp(0.25)));
    CHECK_THROWS_AS(ConditionerOutput::from_raw(raw, 3, 2), DimensionError);
  }
  TEST_CASE("singular weights and mismatched extents") {
    std::vector<Tensor> w{Tensor({2, 2}, 1.0)}, b{Tensor({2})};
    CHECK_THROWS_AS(FlowModel(w, b), SingularMatrixError);
    const FlowModel flow = FlowModel::identity(3, 2);
    CHECK_THROWS_AS(flow.forward(std::vector<double>(2), ConditionerOutput::identity(2, 3)), DimensionError);
    CHECK_THROWS_AS(flow.forward(std::vector<double>(3), ConditionerOutput::identity(1, 3)), DimensionError);
  }
  TEST_CASE("transposed-inverse fault breaks the round trip") {
    std::mt19937_64 rng(6);
    const FlowModel flow = random_flow(3, 3, rng);
    const ConditionerOutput c = random_condition(3, 3, rng);
    const auto m = random_vector(3, rng);
    testing::set_transposed_inverse_fault(true);
    const double err = max_diff(flow.inverse(flow.forward(m, c).z, c), m);
    testing::set_transposed_inverse_fault(false);
    CHECK(err > 1e-6);
  }
  TEST_CASE("init is identity plus small noise") {
    ParamSet p;
    std::mt19937_64 rng(7);
    init_flow(p, 3, 2, rng);
    const Tensor& w = p.get("flow.W1");
    CHECK(std::abs(w.at(0, 0) - 1.0) < 0.1);
    CHECK(std::abs(w.at(0, 1)) < 0.1);
    CHECK(p.get("flow.b0")[2] == 0.0);
  }
}

TEST_SUITE("taped flow") {
  TEST_CASE("batched log_prob and mean equal the direct flow") {
    std::mt19937_64 rng(8);
    const std::size_t d = 12, layers = 3, batch = 7;
    const FlowModel flow = random_flow(d, layers, rng);
    const ParamSet params = flow_params(flow);
    Tensor targets({batch, d}), raw({batch, 2 * layers * d});
    for (std::size_t i = 0; i < batch; ++i) {
      const auto t = random_vector(d, rng);
      const auto r = random_raw_condition(d, layers, rng);
      std::copy(t.begin(), t.end(), targets.raw() + i * d);
      std::copy(r.begin(), r.end(), raw.raw() + i * r.size());
    }
    Tape tape;
    BoundParams bound(tape, params, false);
    const Var lp = flow_log_prob(bound, layers, tape.constant(targets), tape.constant(raw));
    const Var mu = flow_mean(bound, layers, tape.constant(raw));
    for (std::size_t i = 0; i < batch; ++i) {
      const auto c = ConditionerOutput::from_raw(raw.data().subspan(i * 2 * layers * d, 2 * layers * d), layers, d);
      CHECK(std::abs(lp.value()[i] - flow.log_prob(targets.data().subspan(i * d, d), c)) < 1e-10);
      const auto m = flow.mean(c);
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(mu.value().at(i, j) - m[j]) < 1e-10);
    }
  }
  TEST_CASE("gradients of log_prob and mean") {
    std::mt19937_64 rng(9);
    for (int s = 0; s < 20; ++s) {
      const std::size_t d = 3, layers = 2, batch = 1 + s % 4;
      const FlowModel flow = random_flow(d, layers, rng);
      std::vector<Tensor> inputs;
      for (std::size_t k = 0; k < layers; ++k) {
        inputs.push_back(flow.weight(k));
        inputs.push_back(flow.bias(k));
      }
      inputs.push_back(random_tensor({batch, d}, rng));
      inputs.push_back(random_tensor({batch, 2 * layers * d}, rng, -0.5, 0.5));
      auto bind = [layers](Tape& tape, const std::vector<Var>& v) {
        std::map<std::string, Var> vars;
        for (std::size_t k = 0; k < layers; ++k) {
          vars["flow.W" + std::to_string(k)] = v[2 * k];
          vars["flow.b" + std::to_string(k)] = v[2 * k + 1];
        }
        return BoundParams(tape, std::move(vars));
      };
      const auto lp = check_gradients(
          [&](Tape& tape, const std::vector<Var>& v) {
            return flow_log_prob(bind(tape, v), layers, v[2 * layers], v[2 * layers + 1]);
          },
          inputs, s);
      CHECK_MESSAGE(lp.max_rel_error < 1e-5, "log_prob input " << lp.worst_input);
      const auto mean = check_gradients(
          [&](Tape& tape, const std::vector<Var>& v) { return flow_mean(bind(tape, v), layers, v[2 * layers + 1]); },
          inputs, s);
      CHECK_MESSAGE(mean.max_rel_error < 1e-5, "mean input " << mean.worst_input);
    }
  }
}
