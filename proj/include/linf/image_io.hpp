#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "linf/image.hpp"

namespace linf {

/// Binary PPM (P6, maxval 255). Throws ParseError on malformed input and
/// FormatError on an unsupported maxval.
Image decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Image& img);

/// True when the library was built with PNG support.
bool png_supported();

/// Dispatches on file content: P6 PPM, or PNG when supported.
Image read_image(const std::filesystem::path& path);
/// Format chosen from the extension (.png when supported, otherwise PPM).
void write_image(const Image& img, const std::filesystem::path& path);

}  // namespace linf
