// Copyright 2026 The FusionPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// 8-bit raster images and PNG I/O (libpng).

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "fusionpool/error.hpp"

namespace fusionpool {

// Interleaved 8-bit image, row-major, `channels` samples per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, int c = 3, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const RgbImage&) const = default;
};

// Source coordinate for destination index `dst` under half-pixel-centre
// alignment, clamped to the valid sample range.
inline void bilinear_taps(int dst, int dst_size, int src_size, int& i0, int& i1,
                          double& frac) {
  const double scale = static_cast<double>(src_size) / dst_size;
  double src = (dst + 0.5) * scale - 0.5;
  src = std::clamp(src, 0.0, static_cast<double>(src_size - 1));
  i0 = static_cast<int>(std::floor(src));
  i1 = std::min(i0 + 1, src_size - 1);
  frac = src - i0;
}

// Bilinear resample of a planar-or-interleaved float grid. `src` is
// (src_h × src_w × channels) interleaved.
inline std::vector<double> resize_bilinear(const std::vector<double>& src, int src_w,
                                           int src_h, int channels, int dst_w,
                                           int dst_h) {
  std::vector<double> out(static_cast<std::size_t>(dst_w) * dst_h * channels);
  std::vector<int> x0(dst_w), x1(dst_w);
  std::vector<double> fx(dst_w);
  for (int x = 0; x < dst_w; ++x) bilinear_taps(x, dst_w, src_w, x0[x], x1[x], fx[x]);
  for (int y = 0; y < dst_h; ++y) {
    int y0, y1;
    double fy;
    bilinear_taps(y, dst_h, src_h, y0, y1, fy);
    for (int x = 0; x < dst_w; ++x) {
      for (int c = 0; c < channels; ++c) {
        auto s = [&](int yy, int xx) {
          return src[(static_cast<std::size_t>(yy) * src_w + xx) * channels + c];
        };
        const double top = s(y0, x0[x]) + (s(y0, x1[x]) - s(y0, x0[x])) * fx[x];
        const double bot = s(y1, x0[x]) + (s(y1, x1[x]) - s(y1, x0[x])) * fx[x];
        out[(static_cast<std::size_t>(y) * dst_w + x) * channels + c] =
            top + (bot - top) * fy;
      }
    }
  }
  return out;
}

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
};

}  // namespace detail

// Decodes any PNG to 8-bit RGB (alpha dropped, grey expanded, 16-bit stripped).
inline RgbImage read_png(const std::string& path) {
  detail::PngFile file{std::fopen(path.c_str(), "rb")};
  if (!file.fp) fail(ErrorCode::kIo, "cannot open image '" + path + "'");

  png_byte header[8];
  if (std::fread(header, 1, 8, file.fp) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    fail(ErrorCode::kFormat, "'" + path + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kIo, "libpng initialisation failed");
  }
  RgbImage image;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::kFormat, "corrupt PNG '" + path + "'");
  }
  png_init_io(png, file.fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = 3;
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  rows.resize(image.height);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

// Writes an 8-bit RGB PNG. Output bytes depend only on the pixels
// (fixed compression level and filter, no timestamp chunk).
inline void write_png(const std::string& path, const RgbImage& image) {
  if (image.empty() || image.channels != 3) {
    fail(ErrorCode::kInvalidArgument, "write_png expects a non-empty RGB image");
  }
  detail::PngFile file{std::fopen(path.c_str(), "wb")};
  if (!file.fp) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "libpng initialisation failed");
  }
  std::vector<png_const_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::kIo, "PNG encoding failed for '" + path + "'");
  }
  png_init_io(png, file.fp);
  png_set_compression_level(png, 9);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    rows[y] = image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3;
  }
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.fp) != 0) fail(ErrorCode::kIo, "write to '" + path + "' failed");
}

}  // namespace fusionpool
