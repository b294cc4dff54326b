#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "facade/error.hpp"

namespace facade {

/// 8-bit luminance image, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(checked_count(width, height)), fill) {}
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != static_cast<std::size_t>(checked_count(width, height))) {
      throw Error(ErrorKind::DimensionMismatch, "pixel count does not equal width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::uint8_t& at(int x, int y) {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& pixels() noexcept { return pixels_; }

  /// Copy of the rectangle [x0, x0+w) x [y0, y0+h); must lie inside the image.
  GrayImage crop(int x0, int y0, int w, int h) const {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width_ || y0 + h > height_) {
      throw Error(ErrorKind::InvalidParam, "crop rectangle outside image");
    }
    GrayImage out(w, h);
    for (int r = 0; r < h; ++r) {
      std::memcpy(&out.pixels_[static_cast<std::size_t>(r) * w],
                  &pixels_[static_cast<std::size_t>(y0 + r) * width_ + x0],
                  static_cast<std::size_t>(w));
    }
    return out;
  }

  bool operator==(const GrayImage&) const = default;

 private:
  static long checked_count(int w, int h) {
    if (w < 0 || h < 0) throw Error(ErrorKind::InvalidParam, "negative image dimensions");
    return static_cast<long>(w) * h;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const void* data,
                             std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

// Reads one header token of a binary PNM, skipping whitespace and comments.
inline std::string pnm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') {
    tok.push_back(static_cast<char>(buf[pos++]));
  }
  return tok;
}

inline int pnm_int(const std::vector<std::uint8_t>& buf, std::size_t& pos,
                   const char* field) {
  const std::string tok = pnm_token(buf, pos);
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos ||
      tok.size() > 9) {
    throw Error(ErrorKind::UnsupportedFormat,
                std::string("bad PGM header field '") + field + "'");
  }
  return std::stoi(tok);
}

}  // namespace detail

inline GrayImage decode_pgm(const std::vector<std::uint8_t>& buf) {
  std::size_t pos = 0;
  if (detail::pnm_token(buf, pos) != "P5") {
    throw Error(ErrorKind::UnsupportedFormat, "only binary PGM (P5) is supported");
  }
  const int w = detail::pnm_int(buf, pos, "width");
  const int h = detail::pnm_int(buf, pos, "height");
  const int maxval = detail::pnm_int(buf, pos, "maxval");
  if (w <= 0 || h <= 0) throw Error(ErrorKind::UnsupportedFormat, "PGM has zero size");
  if (maxval <= 0 || maxval > 255) {
    throw Error(ErrorKind::UnsupportedFormat, "only 8-bit PGM is supported");
  }
  // Exactly one whitespace byte separates the header from the raster.
  if (pos >= buf.size() || !std::isspace(buf[pos])) {
    throw Error(ErrorKind::Truncated, "PGM header not terminated");
  }
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h;
  if (buf.size() - pos < need) {
    throw Error(ErrorKind::Truncated, "PGM raster truncated: expected " +
                                          std::to_string(need) + " bytes, found " +
                                          std::to_string(buf.size() - pos));
  }
  return GrayImage(w, h, std::vector<std::uint8_t>(buf.begin() + pos, buf.begin() + pos + need));
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels().begin(), img.pixels().end());
  return out;
}

inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

inline GrayImage decode_png(const std::vector<std::uint8_t>& buf) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::UnsupportedFormat, "PNG header rejected: " + msg);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw Error(ErrorKind::UnsupportedFormat, "only 8-bit PNG is supported");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  // Keep the stored samples untouched; alpha is read and then discarded.
  image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB)
                       : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::Truncated, "PNG payload unreadable: " + msg);
  }
  const int channels = static_cast<int>(PNG_IMAGE_PIXEL_CHANNELS(image.format));
  GrayImage out(w, h);
  auto& px = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const std::uint8_t* p = &raw[i * channels];
    px[i] = color ? luma(p[0], p[1], p[2]) : p[0];
  }
  return out;
}

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels().data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels().data(), 0,
                                 nullptr)) {
    throw Error(ErrorKind::Io, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

/// Loads a binary PGM or an 8-bit PNG, sniffing the format from the magic
/// bytes. When expected dimensions are given a mismatch is an error.
inline GrayImage load_image(const std::filesystem::path& path,
                            std::optional<std::pair<int, int>> expected = std::nullopt) {
  const auto buf = detail::read_file_bytes(path);
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  GrayImage img;
  if (buf.size() >= 8 && std::memcmp(buf.data(), kPngMagic, 8) == 0) {
    img = decode_png(buf);
  } else if (buf.size() >= 2 && buf[0] == 'P') {
    img = decode_pgm(buf);
  } else {
    throw Error(ErrorKind::UnsupportedFormat, "unrecognized image format: " + path.string());
  }
  if (expected && (img.width() != expected->first || img.height() != expected->second)) {
    throw Error(ErrorKind::DimensionMismatch,
                path.string() + " is " + std::to_string(img.width()) + "x" +
                    std::to_string(img.height()) + ", expected " +
                    std::to_string(expected->first) + "x" + std::to_string(expected->second));
  }
  return img;
}

inline void save_pgm(const std::filesystem::path& path, const GrayImage& img) {
  const auto bytes = encode_pgm(img);
  detail::write_file_bytes(path, bytes.data(), bytes.size());
}

inline void save_png(const std::filesystem::path& path, const GrayImage& img) {
  const auto bytes = encode_png(img);
  detail::write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace facade
