#include "linf/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "linf/errors.hpp"
#include "linf/image_io.hpp"

namespace linf {
namespace {

using Color = std::array<double, 3>;

Color random_color(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  return {u(rng), u(rng), u(rng)};
}

void mix_into(Image& img, std::size_t y, std::size_t x, const Color& a, const Color& b, double t) {
  for (std::size_t ch = 0; ch < 3; ++ch) img.at(y, x, ch) = a[ch] + (b[ch] - a[ch]) * t;
}

Image grating(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(2.0, 9.0), angle(0.0, std::numbers::pi), phase(0.0, 2 * std::numbers::pi);
  const Color a = random_color(rng), b = random_color(rng);
  const double f1 = freq(rng), t1 = angle(rng), p1 = phase(rng);
  const double f2 = freq(rng), t2 = angle(rng), p2 = phase(rng);
  Image img(size, size);
  const double n = static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = x / n, v = y / n;
      const double s1 = std::sin(2 * std::numbers::pi * f1 * (u * std::cos(t1) + v * std::sin(t1)) + p1);
      const double s2 = std::sin(2 * std::numbers::pi * f2 * (u * std::cos(t2) + v * std::sin(t2)) + p2);
      mix_into(img, y, x, a, b, 0.5 + 0.3 * s1 + 0.2 * s2);
    }
  }
  return img;
}

Image checkerboard(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> cell(5.0, 16.0), angle(0.0, std::numbers::pi / 2), offset(0.0, 16.0);
  const Color a = random_color(rng), b = random_color(rng);
  const double c = cell(rng), t = angle(rng), ox = offset(rng), oy = offset(rng);
  Image img(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (x * std::cos(t) - y * std::sin(t) + ox) / c;
      const double v = (x * std::sin(t) + y * std::cos(t) + oy) / c;
      const long parity = static_cast<long>(std::floor(u)) + static_cast<long>(std::floor(v));
      mix_into(img, y, x, a, b, (parity & 1) ? 1.0 : 0.0);
    }
  }
  return img;
}

Image value_noise(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Image img(size, size, 0.0);
  double total = 0.0;
  double spacing = 4.0 + 20.0 * u01(rng);
  double amplitude = 1.0;
  for (int octave = 0; octave < 3; ++octave) {
    const std::size_t g = static_cast<std::size_t>(std::ceil(size / spacing)) + 2;
    std::vector<double> lattice(g * g * 3);
    for (double& v : lattice) v = u01(rng);
    auto smooth = [](double t) { return t * t * (3 - 2 * t); };
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double fy = y / spacing, fx = x / spacing;
        const std::size_t iy = static_cast<std::size_t>(fy), ix = static_cast<std::size_t>(fx);
        const double ty = smooth(fy - iy), tx = smooth(fx - ix);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          auto at = [&](std::size_t r, std::size_t c) { return lattice[(r * g + c) * 3 + ch]; };
          const double top = at(iy, ix) + (at(iy, ix + 1) - at(iy, ix)) * tx;
          const double bot = at(iy + 1, ix) + (at(iy + 1, ix + 1) - at(iy + 1, ix)) * tx;
          img.at(y, x, ch) += amplitude * (top + (bot - top) * ty);
        }
      }
    }
    total += amplitude;
    amplitude *= 0.5;
    spacing = std::max(2.0, spacing / 2.0);
  }
  for (double& v : img.data()) v /= total;
  return img;
}

Image blobs(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(size)), radius(4.0, size / 4.0),
      angle(0.0, std::numbers::pi), aspect(0.4, 1.0);
  std::uniform_int_distribution<int> count(6, 12);
  Image img(size, size);
  const Color bg = random_color(rng);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) mix_into(img, y, x, bg, bg, 0.0);
  }
  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    const double cy = pos(rng), cx = pos(rng), r = radius(rng), t = angle(rng), a = aspect(rng);
    const Color col = random_color(rng);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
        const double u = (dx * std::cos(t) + dy * std::sin(t)) / r;
        const double v = (-dx * std::sin(t) + dy * std::cos(t)) / (r * a);
        if (u * u + v * v <= 1.0) mix_into(img, y, x, col, col, 0.0);
      }
    }
  }
  return img;
}

}  // namespace

Image procedural_texture(TextureKind kind, std::size_t size, std::mt19937_64& rng) {
  if (size == 0) throw UsageError("texture size must be positive");
  Image img;
  switch (kind) {
    case TextureKind::grating: img = grating(size, rng); break;
    case TextureKind::checkerboard: img = checkerboard(size, rng); break;
    case TextureKind::value_noise: img = value_noise(size, rng); break;
    case TextureKind::blobs: img = blobs(size, rng); break;
  }
  img.clamp();
  img.quantize();
  return img;
}

std::vector<Image> procedural_corpus(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(procedural_texture(static_cast<TextureKind>(i % 4), size, rng));
  return out;
}

std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw UsageError("not a directory: '" + dir.string() + "'");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ppm" || (ext == ".png" && png_supported())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Image> load_image_dir(const std::filesystem::path& dir) {
  std::vector<Image> out;
  for (const auto& f : list_image_files(dir)) out.push_back(read_image(f));
  return out;
}

std::vector<NamedImage> load_corpus(const std::string& source) {
  std::vector<NamedImage> out;
  const std::string prefix = "procedural:";
  if (source.rfind(prefix, 0) == 0) {
    std::size_t count = 0, size = 0;
    unsigned long long seed = 0;
    char tail = 0;
    if (std::sscanf(source.c_str() + prefix.size(), "%zu:%zu:%llu%c", &count, &size, &seed, &tail) != 3 || size == 0) {
      throw UsageError("procedural corpus must be procedural:COUNT:SIZE:SEED, got '" + source + "'");
    }
    auto imgs = procedural_corpus(count, size, seed);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "proc-%03zu", i);
      out.push_back({id, std::move(imgs[i])});
    }
    return out;
  }
  for (const auto& f : list_image_files(source)) out.push_back({f.stem().string(), read_image(f)});
  return out;
}

}  // namespace linf
