#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "linf/errors.hpp"
#include "linf/image.hpp"
#include "linf/image_io.hpp"
#include "linf/metrics.hpp"
#include "linf/resample.hpp"
#include "oracles.hpp"

using namespace linf;

namespace {
std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }
}  // namespace

TEST_SUITE("image") {
  TEST_CASE("pixel centers span (-1, 1)") {
    CHECK(pixel_center(0, 2) == -0.5);
    CHECK(pixel_center(1, 2) == 0.5);
    CHECK(pixel_center(0, 1) == 0.0);
    CHECK(pixel_center(3, 4) == doctest::Approx(0.75));
  }
  TEST_CASE("extents and data checks") {
    CHECK_THROWS_AS(Image(0, 3), UsageError);
    CHECK_THROWS_AS(Image(2, 2, std::vector<double>(5)), DimensionError);
  }
  TEST_CASE("crop, flip, clamp, quantize") {
    std::mt19937_64 rng(1);
    const Image img = oracle::random_image(5, 7, rng);
    const Image c = img.crop(1, 2, 3, 4);
    CHECK(c.at(0, 0, 1) == img.at(1, 2, 1));
    CHECK(c.at(2, 3, 2) == img.at(3, 5, 2));
    CHECK_THROWS_AS(img.crop(3, 0, 3, 1), UsageError);
    const Image f = img.flipped_horizontally();
    CHECK(f.at(4, 0, 0) == img.at(4, 6, 0));
    CHECK(f.flipped_horizontally() == img);
    Image q(1, 1, std::vector<double>{-0.2, 0.5, 1.7});
    q.clamp();
    CHECK(q.at(0, 0, 0) == 0.0);
    CHECK(q.at(0, 0, 2) == 1.0);
    q.quantize();
    CHECK(q.at(0, 0, 1) == doctest::Approx(128.0 / 255.0));
  }
}

TEST_SUITE("resample") {
  TEST_CASE("cubic kernel values") {
    CHECK(cubic_kernel(0.0) == 1.0);
    CHECK(cubic_kernel(1.0) == 0.0);
    CHECK(cubic_kernel(2.0) == 0.0);
    CHECK(cubic_kernel(-1.0) == 0.0);
    CHECK(cubic_kernel(0.5) == doctest::Approx(0.5625));
    CHECK(cubic_kernel(1.5) == doctest::Approx(-0.0625));
    for (double t = 0.0; t < 1.0; t += 0.07) {
      double sum = 0.0;
      for (int i = -3; i <= 3; ++i) sum += cubic_kernel(t - i);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  TEST_CASE("bilinear matches the direct oracle") {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> d(1, 9);
    for (int s = 0; s < 30; ++s) {
      const Image img = oracle::random_image(d(rng), d(rng), rng);
      const std::size_t th = d(rng) * 2, tw = d(rng) + 1;
      CHECK(oracle::max_image_diff(bilinear_upsample(img, th, tw), oracle::naive_bilinear(img, th, tw)) <= 1e-10);
    }
  }
  TEST_CASE("bicubic matches the direct oracle, up and down") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> d(1, 12);
    for (int s = 0; s < 30; ++s) {
      const Image img = oracle::random_image(d(rng), d(rng), rng);
      const std::size_t th = d(rng) + (s % 2) * 10, tw = d(rng);
      CHECK(oracle::max_image_diff(bicubic_resample(img, th, tw), oracle::naive_bicubic(img, th, tw)) <= 1e-10);
    }
  }
  TEST_CASE("same-size resampling is the identity") {
    std::mt19937_64 rng(4);
    const Image img = oracle::random_image(6, 5, rng);
    CHECK(oracle::max_image_diff(bicubic_resample(img, 6, 5), img) <= 1e-15);
    CHECK(oracle::max_image_diff(bilinear_upsample(img, 6, 5), img) <= 1e-15);
  }
  TEST_CASE("constant images stay constant") {
    const Image img(7, 3, 0.3);
    for (const Image& r : {bicubic_resample(img, 2, 11), bicubic_resample(img, 21, 1), bilinear_upsample(img, 14, 6)}) {
      for (double v : r.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-13));
    }
  }
  TEST_CASE("zero target is a usage error") {
    const Image img(2, 2);
    CHECK_THROWS_AS(bicubic_resample(img, 0, 2), UsageError);
    CHECK_THROWS_AS(bilinear_upsample(img, 2, 0), UsageError);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("PSNR of zeros against one half") {
    const Image a(4, 4, 0.0), b(4, 4, 0.5);
    CHECK(psnr(a, b) == doctest::Approx(6.0206).epsilon(1e-5));
    CHECK(std::abs(psnr(a, b) - 20.0 * std::log10(2.0)) < 1e-12);
    CHECK(psnr(a, b, true) == doctest::Approx(20.0 * std::log10(2.0)));
    CHECK(psnr(a, a) == kPsnrIdentical);
    CHECK(format_db(psnr(a, a)) == "inf");
  }
  TEST_CASE("Y-channel PSNR ignores chroma-only changes of zero luma") {
    Image a(2, 2, 0.5), b = a;
    // (+d, -d·0.299/0.587, 0) leaves BT.601 luma unchanged.
    for (std::size_t i = 0; i < 4; ++i) {
      b.data()[i * 3] += 0.1;
      b.data()[i * 3 + 1] -= 0.1 * 0.299 / 0.587;
    }
    CHECK(mse(a, b, true) < 1e-20);
    CHECK(std::isfinite(psnr(a, b)));
  }
  TEST_CASE("SSIM") {
    std::mt19937_64 rng(5);
    const Image a = oracle::random_image(16, 16, rng), b = oracle::random_image(16, 16, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(ssim(a, b) < 0.2);
    CHECK_THROWS_AS(ssim(Image(8, 8), Image(8, 8)), UsageError);
  }
  TEST_CASE("diversity") {
    std::mt19937_64 rng(6);
    const Image a = oracle::random_image(3, 3, rng);
    const std::vector<Image> same{a, a, a, a, a};
    CHECK(diversity(same) == 0.0);
    const std::vector<Image> pair{Image(2, 2, 0.0), Image(2, 2, 1.0)};
    CHECK(diversity(pair) == doctest::Approx(0.5));
  }
  TEST_CASE("mismatched extents") {
    CHECK_THROWS_AS(psnr(Image(2, 2), Image(2, 3)), DimensionError);
  }
  TEST_CASE("CSV header and row") {
    CHECK(std::string(MetricReport::csv_header()) == "image_id,scale,tau,psnr_y,psnr_rgb,ssim,diversity");
    MetricReport r{"img", 2.0, 0.5, kPsnrIdentical, 30.0, 0.9, 0.0};
    CHECK(r.csv_row().rfind("img,2,0.5,inf,30.000000,", 0) == 0);
  }
}

TEST_SUITE("image io") {
  TEST_CASE("PPM round trip at 8 bits") {
    std::mt19937_64 rng(7);
    Image img = oracle::random_image(5, 3, rng);
    img.quantize();
    const auto bytes = encode_ppm(img);
    CHECK(decode_ppm(bytes) == img);
  }
  TEST_CASE("header comments and whitespace") {
    const auto bytes = bytes_of(std::string("P6\n# a comment\n1 1\n255\n") + std::string("\x00\x80\xff", 3));
    const Image img = decode_ppm(bytes);
    CHECK(img.at(0, 0, 1) == doctest::Approx(128.0 / 255.0));
    CHECK(img.at(0, 0, 2) == 1.0);
  }
  TEST_CASE("malformed PPM input") {
    CHECK_THROWS_AS(decode_ppm(bytes_of("P5\n1 1\n255\n\x01")), ParseError);
    CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 2\n255\n\x01\x02")), ParseError);
    CHECK_THROWS_AS(decode_ppm(bytes_of("P6\nx 2\n255\n")), ParseError);
    CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06")), FormatError);
    try {
      decode_ppm(bytes_of("P6\n1 z\n255\n"));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 5);
    }
  }
  TEST_CASE("file round trip by extension") {
    std::mt19937_64 rng(8);
    Image img = oracle::random_image(4, 6, rng);
    img.quantize();
    const auto dir = std::filesystem::temp_directory_path() / "linf_io_test";
    std::filesystem::create_directories(dir);
    write_image(img, dir / "a.ppm");
    CHECK(read_image(dir / "a.ppm") == img);
    if (png_supported()) {
      write_image(img, dir / "a.png");
      CHECK(read_image(dir / "a.png") == img);
    }
    CHECK_THROWS_AS(read_image(dir / "missing.ppm"), UsageError);
    std::filesystem::remove_all(dir);
  }
}
