#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "linf/encoder.hpp"
#include "linf/errors.hpp"
#include "oracles.hpp"

using namespace linf;

namespace {

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.channels = 8;
  c.residual_blocks = 2;
  return c;
}

ParamSet encoder_params(const EncoderConfig& c, std::uint64_t seed) {
  ParamSet p;
  std::mt19937_64 rng(seed);
  init_encoder(p, c, rng);
  return p;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("zero parameters give a zero feature map") {
    const EncoderConfig c = small_encoder();
    ParamSet p = encoder_params(c, 1);
    for (auto& [name, t] : p) t = Tensor(t.shape());
    std::mt19937_64 rng(2);
    const FeatureMap fm = encode(oracle::random_image(7, 5, rng), c, p);
    for (double v : fm.data) REQUIRE(v == 0.0);
  }

  TEST_CASE("output extents equal input extents") {
    const EncoderConfig c = small_encoder();
    const ParamSet p = encoder_params(c, 3);
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> ext(1, 32);
    for (int i = 0; i < 25; ++i) {
      const std::size_t h = ext(rng), w = ext(rng);
      const FeatureMap fm = encode(oracle::random_image(h, w, rng), c, p);
      REQUIRE(fm.height == h);
      REQUIRE(fm.width == w);
      REQUIRE(fm.channels == c.channels);
      REQUIRE(fm.data.size() == h * w * c.channels);
    }
  }

  TEST_CASE("deterministic given image and parameters") {
    const EncoderConfig c = small_encoder();
    const ParamSet p = encoder_params(c, 5);
    std::mt19937_64 rng(6);
    const Image img = oracle::random_image(9, 11, rng);
    CHECK(encode(img, c, p).data == encode(img, c, p).data);
    CHECK(p == encoder_params(c, 5));
  }

  TEST_CASE("head kernel gradient matches finite differences") {
    const EncoderConfig c = small_encoder();
    const ParamSet p = encoder_params(c, 7);
    std::mt19937_64 rng(8);
    const Tensor img = oracle::random_image(6, 5, rng).to_tensor().reshaped({1, 6, 5, 3});
    auto build = [&](Tape& t, const std::vector<Var>& leaves) {
      std::map<std::string, Var> vars;
      for (const auto& [name, v] : p) vars.emplace(name, name == "enc.head.w" ? leaves[0] : t.constant(v));
      return encode(BoundParams(t, std::move(vars)), c, t.constant(img));
    };
    const auto r = oracle::check_gradients(build, {p.get("enc.head.w")}, 9);
    CHECK(r.max_rel_error <= 1e-4);
  }

  TEST_CASE("parameter and config mismatch") {
    const EncoderConfig c = small_encoder();
    ParamSet p = encoder_params(c, 1);
    EncoderConfig more = c;
    more.residual_blocks = 3;
    CHECK_THROWS_AS(encode(Image(4, 4), more, p), ConfigError);
    p.set("enc.head.w", Tensor({3, 3, 3, 4}));
    CHECK_THROWS_AS(encode(Image(4, 4), c, p), ConfigError);
  }
}
