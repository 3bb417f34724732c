#include "linf/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "linf/errors.hpp"

#ifdef LINF_WITH_PNG
#include <png.h>
#endif

namespace linf {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_separators() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_separators();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) throw ParseError(std::string("PPM ") + field + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PPM ") + field + " is not a number", start);
    return value;
  }

  std::size_t pos_ = 0;

 private:
  std::span<const std::uint8_t> bytes_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open image file " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint8_t to_byte(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

#ifdef LINF_WITH_PNG
Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ParseError(std::string("malformed PNG: ") + image.message, 0);
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw FormatError("PNG with alpha channel is not supported");
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError("unsupported PNG bit depth (only 8-bit RGB)");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    throw ParseError(std::string("malformed PNG: ") + image.message, 0);
  }
  Image out(image.height, image.width);
  for (std::size_t i = 0; i < raw.size(); ++i) out.data()[i] = raw[i] / 255.0;
  return out;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raw(img.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img.data()[i]);
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, raw.data(), 0, nullptr)) {
    throw UsageError(std::string("cannot write PNG: ") + image.message);
  }
}
#endif

}  // namespace

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ParseError("bad PPM magic number", 0);
  HeaderReader r(bytes);
  r.pos_ = 2;
  const std::size_t width = r.number("width");
  const std::size_t height = r.number("height");
  const std::size_t maxval_at = r.pos_;
  const std::size_t maxval = r.number("maxval");
  if (width == 0 || height == 0) throw ParseError("PPM extents must be positive", maxval_at);
  if (maxval != 255) throw FormatError("unsupported PPM bit depth: maxval " + std::to_string(maxval));
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) throw ParseError("missing separator after maxval", r.pos_);
  const std::size_t start = r.pos_ + 1;
  const std::size_t need = width * height * 3;
  if (bytes.size() - start < need) throw ParseError("truncated PPM pixel data", bytes.size());
  std::vector<double> data(need);
  for (std::size_t i = 0; i < need; ++i) data[i] = bytes[start + i] / 255.0;
  return Image(height, width, std::move(data));
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.data().size());
  for (double v : img.data()) out.push_back(to_byte(v));
  return out;
}

bool png_supported() {
#ifdef LINF_WITH_PNG
  return true;
#else
  return false;
#endif
}

Image read_image(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
#ifdef LINF_WITH_PNG
    return decode_png(bytes);
#else
    throw FormatError("PNG support is not enabled in this build: " + path.string());
#endif
  }
  return decode_ppm(bytes);
}

void write_image(const Image& img, const std::filesystem::path& path) {
  if (path.extension() == ".png") {
#ifdef LINF_WITH_PNG
    write_png(img, path);
    return;
#else
    throw FormatError("PNG support is not enabled in this build");
#endif
  }
  const std::vector<std::uint8_t> bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write image file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace linf
