#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "linf/encoder.hpp"
#include "linf/errors.hpp"
#include "linf/implicit.hpp"
#include "linf/model.hpp"
#include "linf/ops.hpp"
#include "oracles.hpp"

using namespace linf;

namespace {

ModelConfig micro_config() {
  ModelConfig cfg;
  cfg.encoder.channels = 8;
  cfg.encoder.residual_blocks = 1;
  cfg.frequencies = 4;
  cfg.flow_layers = 3;
  cfg.conditioner_width = 16;
  cfg.phase_hidden = 8;
  return cfg;
}

// Gives the zero-initialised conditioner head random weights so outputs depend on κ.
void randomize_head(LinfModel& m, std::mt19937_64& rng) {
  for (const char* name : {"cond.out.w", "cond.out.b"}) {
    Tensor& t = m.params.get(name);
    t = oracle::random_tensor(t.shape(), rng, -0.1, 0.1);
  }
}

Coord random_coord(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {u(rng), u(rng)};
}

}  // namespace

TEST_SUITE("nearest feature") {
  TEST_CASE("matches brute force over pixel centers") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> d(1, 9);
    for (int s = 0; s < 2000; ++s) {
      const std::size_t h = d(rng), w = d(rng);
      const Coord q = random_coord(rng);
      const LatticeIndex got = nearest_index(h, w, q);
      auto brute = [](double v, std::size_t n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
          if (std::abs(pixel_center(i, n) - v) < std::abs(pixel_center(best, n) - v)) best = i;
        }
        return best;
      };
      CHECK(got.row == brute(q.y, h));
      CHECK(got.col == brute(q.x, w));
    }
  }
  TEST_CASE("ties go to the smaller index and borders clamp") {
    CHECK(nearest_index(2, 2, {0.0, 0.0}) == LatticeIndex{0, 0});
    CHECK(nearest_index(4, 4, {-1.0, 1.0}) == LatticeIndex{0, 3});
    CHECK(nearest_index(4, 4, {-1.3, 1.2}) == LatticeIndex{0, 3});
  }
  TEST_CASE("returns the feature vector at the chosen index") {
    FeatureMap fm{2, 3, 2, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};
    const NearestFeature nf = nearest_feature(fm, {0.6, 0.1});
    CHECK(nf.index == LatticeIndex{1, 1});
    CHECK(nf.feature == std::vector<double>{8, 9});
    CHECK(nf.center.y == doctest::Approx(0.5));
    CHECK(nf.center.x == doctest::Approx(0.0));
  }
}

TEST_SUITE("ensemble neighborhood") {
  TEST_CASE("weights reproduce affine functions inside the lattice") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> d(2, 9);
    for (int s = 0; s < 500; ++s) {
      const std::size_t h = d(rng), w = d(rng);
      // Stay inside the hull of pixel centers so no clamping happens.
      std::uniform_real_distribution<double> uy(pixel_center(0, h), pixel_center(h - 1, h)),
          ux(pixel_center(0, w), pixel_center(w - 1, w));
      const Coord q{uy(rng), ux(rng)};
      const EnsembleNeighborhood n = ensemble_neighborhood(h, w, q);
      double total = 0.0, fy = 0.0, fx = 0.0;
      for (const auto& e : n.entries) {
        CHECK(e.weight >= 0.0);
        total += e.weight;
        fy += e.weight * e.center.y;
        fx += e.weight * e.center.x;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(fy == doctest::Approx(q.y).epsilon(1e-12));
      CHECK(fx == doctest::Approx(q.x).epsilon(1e-12));
      const auto& e = n.entries;
      CHECK(e[0].index.row == e[1].index.row);
      CHECK(e[2].index.row == e[0].index.row + 1);
      CHECK(e[1].index.col == e[0].index.col + 1);
      CHECK(e[3].index == LatticeIndex{e[2].index.row, e[1].index.col});
    }
  }
  TEST_CASE("bilinear weights by hand") {
    const auto w = ensemble_weights({0.25, 0.5}, {0.0, 0.0}, {1.0, 1.0});
    CHECK(w[0] == doctest::Approx(0.375));
    CHECK(w[1] == doctest::Approx(0.375));
    CHECK(w[2] == doctest::Approx(0.125));
    CHECK(w[3] == doctest::Approx(0.125));
  }
  TEST_CASE("border queries clamp to the nearest cell") {
    const EnsembleNeighborhood n = ensemble_neighborhood(4, 4, {-0.99, 0.99});
    CHECK(n.entries[0].index == LatticeIndex{0, 2});
    CHECK(n.entries[0].weight == doctest::Approx(0.0));
    CHECK(n.entries[1].weight == doctest::Approx(1.0));
  }
  TEST_CASE("one-pixel axes merge duplicate weights") {
    const EnsembleNeighborhood n = ensemble_neighborhood(1, 1, {0.3, -0.4});
    CHECK(n.entries[0].weight == 1.0);
    for (int j = 1; j < 4; ++j) CHECK(n.entries[j].weight == 0.0);
    const EnsembleNeighborhood m = ensemble_neighborhood(1, 3, {0.2, 0.1});
    CHECK(m.entries[0].weight + m.entries[1].weight == doctest::Approx(1.0));
    CHECK(m.entries[2].weight == 0.0);
    CHECK(m.entries[3].weight == 0.0);
  }
}

TEST_SUITE("fourier features") {
  TEST_CASE("scalar oracle for K = 1") {
    FourierBank bank{1, {2.0, 3.0}, {0.5, -1.0}, {0.25}};
    const Coord delta{0.4, 0.3};
    const double theta = std::numbers::pi * (0.5 * 0.4 - 1.0 * 0.3) + 0.25;
    const auto f = fourier_features(bank, delta);
    REQUIRE(f.size() == 2);
    CHECK(f[0] == doctest::Approx(2.0 * std::cos(theta)).epsilon(1e-15));
    CHECK(f[1] == doctest::Approx(3.0 * std::sin(theta)).epsilon(1e-15));
  }
  TEST_CASE("inconsistent bank extents") {
    FourierBank bank{2, {1.0}, {1.0, 2.0, 3.0, 4.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(fourier_features(bank, {}), DimensionError);
  }
  TEST_CASE("lattice offsets are resolution independent") {
    const Coord d1 = lattice_delta({0.5, 0.0}, lattice_center({1, 0}, 2, 1), 2, 1);
    CHECK(d1.y == doctest::Approx(0.0));
    const Coord d2 = lattice_delta({0.0, 0.0}, lattice_center({0, 0}, 4, 4), 4, 4);
    CHECK(d2.y == doctest::Approx(3.0));  // 1.5 LR pixels
    CHECK(d2.x == doctest::Approx(3.0));
  }
}

TEST_SUITE("encoder and batched path") {
  TEST_CASE("encoder config validation") {
    EncoderConfig c;
    c.kernel = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.channels = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  TEST_CASE("taped encoder equals the direct encoder") {
    std::mt19937_64 rng(3);
    const ModelConfig cfg = micro_config();
    const LinfModel m = LinfModel::create(cfg, 7);
    const Image img = oracle::random_image(5, 6, rng);
    const FeatureMap fm = m.encode(img);
    Tape tape;
    BoundParams bound(tape, m.params, false);
    const Var f = encode(bound, cfg.encoder, tape.constant(img.to_tensor().reshaped({1, 5, 6, 3})));
    CHECK(fm.height == 5);
    CHECK(fm.channels == 8);
    double diff = 0.0;
    for (std::size_t i = 0; i < fm.data.size(); ++i) diff = std::max(diff, std::abs(fm.data[i] - f.value()[i]));
    CHECK(diff == 0.0);
  }
  TEST_CASE("missing or misshapen parameters") {
    const ModelConfig cfg = micro_config();
    LinfModel m = LinfModel::create(cfg, 7);
    ModelConfig wide = cfg;
    wide.encoder.channels = 16;
    CHECK_THROWS_AS(encode(Image(4, 4), wide.encoder, m.params), ConfigError);
    CHECK_THROWS_AS(ParamSet().get("enc.head.w"), ConfigError);
  }
  TEST_CASE("batched ensemble and conditioner equal the per-query path") {
    std::mt19937_64 rng(4);
    for (EnsembleWeighting weighting : {EnsembleWeighting::full, EnsembleWeighting::none}) {
      ModelConfig cfg = micro_config();
      cfg.weighting = weighting;
      LinfModel m = LinfModel::create(cfg, 9);
      randomize_head(m, rng);
      const std::size_t h = 4, w = 5;
      const Image img = oracle::random_image(h, w, rng);
      const FeatureMap fm = m.encode(img);
      Tape tape;
      BoundParams bound(tape, m.params, false);
      const Var feats = tape.constant(Tensor({1, h, w, cfg.encoder.channels}, fm.data));
      QueryBatch batch;
      std::vector<Coord> qs;
      std::vector<double> cells;
      for (int i = 0; i < 40; ++i) {
        qs.push_back(random_coord(rng));
        cells.push_back(0.1 + 0.01 * i);
        batch.add(0, h, w, qs.back(), cells.back());
      }
      const HeadMaps heads = fourier_heads(bound, cfg, feats);
      const Var phases = phase_mlp(bound, tape.constant(Tensor({batch.size()}, batch.cells)));
      const Var kappa = fourier_ensemble(heads, phases, batch, cfg);
      const Var raw = conditioner_raw(bound, kappa);
      for (std::size_t i = 0; i < qs.size(); ++i) {
        const auto ref = fourier_feature_ensemble(fm, qs[i], cells[i], m.params, cfg);
        for (std::size_t j = 0; j < ref.size(); ++j) CHECK(std::abs(ref[j] - kappa.value().at(i, j)) < 1e-12);
        const ConditionerOutput c = conditioner(ref, m.params, cfg);
        const auto rc = ConditionerOutput::from_raw(raw.value().data().subspan(i * cfg.conditioner_out(), cfg.conditioner_out()),
                                                    cfg.flow_layers, cfg.dim());
        for (std::size_t j = 0; j < c.phi.size(); ++j) {
          CHECK(std::abs(c.phi[j] - rc.phi[j]) < 1e-12);
          CHECK(std::abs(c.alpha_pre[j] - rc.alpha_pre[j]) < 1e-12);
        }
      }
    }
  }
  TEST_CASE("fresh model predicts near-zero texture") {
    const ModelConfig cfg = micro_config();
    const LinfModel m = LinfModel::create(cfg, 3);
    std::mt19937_64 rng(5);
    const FeatureMap fm = m.encode(oracle::random_image(4, 4, rng));
    const std::vector<double> z(cfg.dim(), 0.0);
    const auto p = fourier_ensemble_predict(fm, {0.1, 0.2}, 0.5, m.params, cfg, m.flow(), z);
    for (double v : p) CHECK(std::abs(v) < 1e-12);
  }
  TEST_CASE("pass counters per query") {
    ModelConfig cfg = micro_config();
    LinfModel m = LinfModel::create(cfg, 3);
    std::mt19937_64 rng(6);
    const FeatureMap fm = m.encode(oracle::random_image(4, 4, rng));
    const std::vector<double> z(cfg.dim(), 0.0);
    PassCounters fourier, local;
    (void)fourier_ensemble_predict(fm, {0.1, 0.2}, 0.5, m.params, cfg, m.flow(), z, &fourier);
    (void)local_ensemble_predict(fm, {0.1, 0.2}, 0.5, m.params, cfg, m.flow(), z, &local);
    CHECK(fourier.conditioner == 1);
    CHECK(fourier.flow == 1);
    CHECK(fourier.estimator == 4);
    CHECK(local.conditioner == 4);
    CHECK(local.flow == 4);
  }
}
