// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The CRRCD Authors.

#include "crrcd/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include "crrcd/error.hpp"

namespace crrcd {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr double kLevels = 65535.0;

std::uint16_t to_level(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * kLevels));
}

}  // namespace

void quantize16(Image& image) {
  for (double& v : image.pixels) v = to_level(v) / kLevels;
}

namespace {

// libpng reports errors with longjmp; each helper keeps its setjmp scope free
// of objects with destructors and returns false on failure.

bool png_write_all(png_structp png, png_infop info, std::FILE* file, png_uint_32 width,
                   png_uint_32 height, int color, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_set_IHDR(png, info, width, height, 16, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, nullptr);
  return true;
}

bool png_read_header(png_structp png, png_infop info, std::FILE* file, png_uint_32* width,
                     png_uint_32* height, int* depth, int* color) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, file);
  png_read_info(png, info);
  *width = png_get_image_width(png, info);
  *height = png_get_image_height(png, info);
  *depth = png_get_bit_depth(png, info);
  *color = png_get_color_type(png, info);
  return true;
}

bool png_read_body(png_structp png, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  return true;
}

}  // namespace

void write_png16(const std::filesystem::path& path, const Image& image) {
  CRRCD_REQUIRE(image.channels == 1 || image.channels == 3, "write_png16: need 1 or 3 channels");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const int c = image.channels;
  const std::size_t stride = static_cast<std::size_t>(image.width) * c * 2;
  std::vector<png_byte> buffer(stride * static_cast<std::size_t>(image.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  for (int y = 0; y < image.height; ++y) {
    png_bytep row = buffer.data() + stride * static_cast<std::size_t>(y);
    rows[static_cast<std::size_t>(y)] = row;
    for (int x = 0; x < image.width; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const std::uint16_t level = to_level(image.at(ch, y, x));
        const std::size_t k = (static_cast<std::size_t>(x) * c + ch) * 2;
        row[k] = static_cast<png_byte>(level >> 8);  // PNG samples are big-endian
        row[k + 1] = static_cast<png_byte>(level & 0xff);
      }
    }
  }

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  const bool ok = info && png_write_all(png, info, file.get(), static_cast<png_uint_32>(image.width),
                                        static_cast<png_uint_32>(image.height),
                                        c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, rows.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) throw std::runtime_error("libpng: failed writing '" + path.string() + "'");
}

Image read_png16(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  png_uint_32 width = 0, height = 0;
  int depth = 0, color = 0;
  if (!info || !png_read_header(png, info, file.get(), &width, &height, &depth, &color)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng: failed reading '" + path.string() + "'");
  }
  if (depth != 16 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("'" + path.string() + "' is not a 16-bit gray/RGB PNG");
  }
  const int c = color == PNG_COLOR_TYPE_GRAY ? 1 : 3;
  const std::size_t stride = static_cast<std::size_t>(width) * c * 2;
  std::vector<png_byte> buffer(stride * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + stride * y;
  const bool ok = png_read_body(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw std::runtime_error("libpng: failed reading '" + path.string() + "'");

  Image image(c, static_cast<int>(height), static_cast<int>(width));
  for (int y = 0; y < image.height; ++y) {
    const png_bytep row = rows[static_cast<std::size_t>(y)];
    for (int x = 0; x < image.width; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t k = (static_cast<std::size_t>(x) * c + ch) * 2;
        const unsigned level = (static_cast<unsigned>(row[k]) << 8) | row[k + 1];
        image.at(ch, y, x) = level / kLevels;
      }
    }
  }
  return image;
}

}  // namespace crrcd
