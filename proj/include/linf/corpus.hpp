#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "linf/image.hpp"

namespace linf {

enum class TextureKind { grating, checkerboard, value_noise, blobs };

/// One 8-bit-quantized procedural texture of the given kind.
Image procedural_texture(TextureKind kind, std::size_t size, std::mt19937_64& rng);

/// `count` textures cycling through the four kinds, fully determined by `seed`.
std::vector<Image> procedural_corpus(std::size_t count, std::size_t size, std::uint64_t seed);

/// Every .ppm (and .png when available) file in `dir`, sorted by file name.
std::vector<Image> load_image_dir(const std::filesystem::path& dir);
std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir);

struct NamedImage {
  std::string id;
  Image image;
};

/// "procedural:COUNT:SIZE:SEED" (ids proc-000, ...) or an image directory (ids are file stems).
std::vector<NamedImage> load_corpus(const std::string& source);

}  // namespace linf
