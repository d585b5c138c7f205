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

// PNG renderings of heatmaps and 2-D embeddings.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fusionpool/detail/binary_io.hpp"
#include "fusionpool/explain/gradcam.hpp"
#include "fusionpool/explain/tsne.hpp"
#include "fusionpool/image.hpp"

namespace fusionpool {

inline constexpr double kHeatmapAlpha = 0.4;
inline constexpr int kDefaultHeatmapSize = 224;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// Blue → cyan → yellow → red ramp over [0, 1].
inline Rgb color_ramp(double v) {
  v = std::clamp(v, 0.0, 1.0);
  auto ch = [&](double centre) {
    const double t = std::clamp(1.5 - std::abs(4.0 * v - centre), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * t));
  };
  return {ch(3.0), ch(2.0), ch(1.0)};
}

// Heatmap upsampled to the frame (or to 224×224 without one), pushed through
// the ramp and blended over the frame with weight 0.4.
inline RgbImage heatmap_image(const Heatmap& h, const std::optional<RgbImage>& base = std::nullopt) {
  const int W = base ? base->width : kDefaultHeatmapSize;
  const int H = base ? base->height : kDefaultHeatmapSize;
  const auto up = resize_bilinear(h.grid, h.width, h.height, 1, W, H);
  RgbImage out(W, H, 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const auto c = color_ramp(up[static_cast<std::size_t>(y) * W + x]);
      const std::uint8_t ramp[3] = {c.r, c.g, c.b};
      for (int k = 0; k < 3; ++k) {
        if (base) {
          const int bk = base->channels >= 3 ? k : 0;
          const double v = (1.0 - kHeatmapAlpha) * base->at(x, y, bk) + kHeatmapAlpha * ramp[k];
          out.at(x, y, k) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
        } else {
          out.at(x, y, k) = ramp[k];
        }
      }
    }
  }
  return out;
}

inline void render_heatmap(const Heatmap& h, const std::optional<RgbImage>& base,
                           const std::string& path) {
  write_png(path, heatmap_image(h, base));
}

namespace detail {

// 5×7 glyphs for ASCII 32..126, one byte per column, bit 0 at the top.
inline constexpr std::array<std::array<std::uint8_t, 5>, 95> kFont = {{
    {0x00, 0x00, 0x00, 0x00, 0x00}, {0x00, 0x00, 0x5f, 0x00, 0x00}, {0x00, 0x07, 0x00, 0x07, 0x00},
    {0x14, 0x7f, 0x14, 0x7f, 0x14}, {0x24, 0x2a, 0x7f, 0x2a, 0x12}, {0x23, 0x13, 0x08, 0x64, 0x62},
    {0x36, 0x49, 0x55, 0x22, 0x50}, {0x00, 0x05, 0x03, 0x00, 0x00}, {0x00, 0x1c, 0x22, 0x41, 0x00},
    {0x00, 0x41, 0x22, 0x1c, 0x00}, {0x14, 0x08, 0x3e, 0x08, 0x14}, {0x08, 0x08, 0x3e, 0x08, 0x08},
    {0x00, 0x50, 0x30, 0x00, 0x00}, {0x08, 0x08, 0x08, 0x08, 0x08}, {0x00, 0x60, 0x60, 0x00, 0x00},
    {0x20, 0x10, 0x08, 0x04, 0x02}, {0x3e, 0x51, 0x49, 0x45, 0x3e}, {0x00, 0x42, 0x7f, 0x40, 0x00},
    {0x42, 0x61, 0x51, 0x49, 0x46}, {0x21, 0x41, 0x45, 0x4b, 0x31}, {0x18, 0x14, 0x12, 0x7f, 0x10},
    {0x27, 0x45, 0x45, 0x45, 0x39}, {0x3c, 0x4a, 0x49, 0x49, 0x30}, {0x01, 0x71, 0x09, 0x05, 0x03},
    {0x36, 0x49, 0x49, 0x49, 0x36}, {0x06, 0x49, 0x49, 0x29, 0x1e}, {0x00, 0x36, 0x36, 0x00, 0x00},
    {0x00, 0x56, 0x36, 0x00, 0x00}, {0x08, 0x14, 0x22, 0x41, 0x00}, {0x14, 0x14, 0x14, 0x14, 0x14},
    {0x00, 0x41, 0x22, 0x14, 0x08}, {0x02, 0x01, 0x51, 0x09, 0x06}, {0x32, 0x49, 0x79, 0x41, 0x3e},
    {0x7e, 0x11, 0x11, 0x11, 0x7e}, {0x7f, 0x49, 0x49, 0x49, 0x36}, {0x3e, 0x41, 0x41, 0x41, 0x22},
    {0x7f, 0x41, 0x41, 0x22, 0x1c}, {0x7f, 0x49, 0x49, 0x49, 0x41}, {0x7f, 0x09, 0x09, 0x09, 0x01},
    {0x3e, 0x41, 0x49, 0x49, 0x7a}, {0x7f, 0x08, 0x08, 0x08, 0x7f}, {0x00, 0x41, 0x7f, 0x41, 0x00},
    {0x20, 0x40, 0x41, 0x3f, 0x01}, {0x7f, 0x08, 0x14, 0x22, 0x41}, {0x7f, 0x40, 0x40, 0x40, 0x40},
    {0x7f, 0x02, 0x0c, 0x02, 0x7f}, {0x7f, 0x04, 0x08, 0x10, 0x7f}, {0x3e, 0x41, 0x41, 0x41, 0x3e},
    {0x7f, 0x09, 0x09, 0x09, 0x06}, {0x3e, 0x41, 0x51, 0x21, 0x5e}, {0x7f, 0x09, 0x19, 0x29, 0x46},
    {0x46, 0x49, 0x49, 0x49, 0x31}, {0x01, 0x01, 0x7f, 0x01, 0x01}, {0x3f, 0x40, 0x40, 0x40, 0x3f},
    {0x1f, 0x20, 0x40, 0x20, 0x1f}, {0x3f, 0x40, 0x38, 0x40, 0x3f}, {0x63, 0x14, 0x08, 0x14, 0x63},
    {0x07, 0x08, 0x70, 0x08, 0x07}, {0x61, 0x51, 0x49, 0x45, 0x43}, {0x00, 0x7f, 0x41, 0x41, 0x00},
    {0x02, 0x04, 0x08, 0x10, 0x20}, {0x00, 0x41, 0x41, 0x7f, 0x00}, {0x04, 0x02, 0x01, 0x02, 0x04},
    {0x40, 0x40, 0x40, 0x40, 0x40}, {0x00, 0x01, 0x02, 0x04, 0x00}, {0x20, 0x54, 0x54, 0x54, 0x78},
    {0x7f, 0x48, 0x44, 0x44, 0x38}, {0x38, 0x44, 0x44, 0x44, 0x20}, {0x38, 0x44, 0x44, 0x48, 0x7f},
    {0x38, 0x54, 0x54, 0x54, 0x18}, {0x08, 0x7e, 0x09, 0x01, 0x02}, {0x0c, 0x52, 0x52, 0x52, 0x3e},
    {0x7f, 0x08, 0x04, 0x04, 0x78}, {0x00, 0x44, 0x7d, 0x40, 0x00}, {0x20, 0x40, 0x44, 0x3d, 0x00},
    {0x7f, 0x10, 0x28, 0x44, 0x00}, {0x00, 0x41, 0x7f, 0x40, 0x00}, {0x7c, 0x04, 0x18, 0x04, 0x78},
    {0x7c, 0x08, 0x04, 0x04, 0x78}, {0x38, 0x44, 0x44, 0x44, 0x38}, {0x7c, 0x14, 0x14, 0x14, 0x08},
    {0x08, 0x14, 0x14, 0x18, 0x7c}, {0x7c, 0x08, 0x04, 0x04, 0x08}, {0x48, 0x54, 0x54, 0x54, 0x20},
    {0x04, 0x3f, 0x44, 0x40, 0x20}, {0x3c, 0x40, 0x40, 0x20, 0x7c}, {0x1c, 0x20, 0x40, 0x20, 0x1c},
    {0x3c, 0x40, 0x30, 0x40, 0x3c}, {0x44, 0x28, 0x10, 0x28, 0x44}, {0x0c, 0x50, 0x50, 0x50, 0x3c},
    {0x44, 0x64, 0x54, 0x4c, 0x44}, {0x00, 0x08, 0x36, 0x41, 0x00}, {0x00, 0x00, 0x7f, 0x00, 0x00},
    {0x00, 0x41, 0x36, 0x08, 0x00}, {0x08, 0x04, 0x08, 0x10, 0x08},
}};

class Canvas {
 public:
  Canvas(int w, int h, Rgb fill) : img_(w, h, 3) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) set(x, y, fill);
    }
  }

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    img_.at(x, y, 0) = c.r;
    img_.at(x, y, 1) = c.g;
    img_.at(x, y, 2) = c.b;
  }

  void rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) set(x, y, c);
    }
  }

  void disc(double cx, double cy, double r, Rgb c) {
    const int x0 = static_cast<int>(std::floor(cx - r)), x1 = static_cast<int>(std::ceil(cx + r));
    const int y0 = static_cast<int>(std::floor(cy - r)), y1 = static_cast<int>(std::ceil(cy + r));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy;
        if (dx * dx + dy * dy <= r * r) set(x, y, c);
      }
    }
  }

  // Unknown characters render as '?'.
  void text(int x, int y, std::string_view s, Rgb c, int scale = 1) {
    for (char ch : s) {
      const int idx = (ch >= 32 && ch <= 126) ? ch - 32 : '?' - 32;
      const auto& g = kFont[static_cast<std::size_t>(idx)];
      for (int col = 0; col < 5; ++col) {
        for (int row = 0; row < 7; ++row) {
          if (g[static_cast<std::size_t>(col)] & (1u << row)) {
            rect(x + col * scale, y + row * scale, x + (col + 1) * scale - 1,
                 y + (row + 1) * scale - 1, c);
          }
        }
      }
      x += 6 * scale;
    }
  }

  const RgbImage& image() const { return img_; }

 private:
  RgbImage img_;
};

inline Rgb palette(std::uint32_t i) {
  static constexpr Rgb kColors[] = {
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
      {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207},
  };
  return kColors[i % 10];
}

}  // namespace detail

inline constexpr int kScatterWidth = 640;
inline constexpr int kScatterHeight = 480;

// One disc per point coloured by class, axes box, and a legend of class names.
inline RgbImage scatter_image(const Embedding2D& e, std::span<const std::string> class_names) {
  constexpr Rgb white{255, 255, 255}, black{0, 0, 0}, grey{200, 200, 200};
  detail::Canvas canvas(kScatterWidth, kScatterHeight, white);
  const int left = 30, top = 20, right = kScatterWidth - 170, bottom = kScatterHeight - 30;
  canvas.rect(left, top, right, top, grey);
  canvas.rect(left, bottom, right, bottom, black);
  canvas.rect(left, top, left, bottom, black);
  canvas.rect(right, top, right, bottom, grey);

  const auto n = e.size();
  if (n > 0) {
    double xmin = e.points[0], xmax = e.points[0], ymin = e.points[1], ymax = e.points[1];
    for (std::size_t i = 1; i < n; ++i) {
      xmin = std::min(xmin, e.points[2 * i]);
      xmax = std::max(xmax, e.points[2 * i]);
      ymin = std::min(ymin, e.points[2 * i + 1]);
      ymax = std::max(ymax, e.points[2 * i + 1]);
    }
    if (xmax - xmin <= 0.0) {
      xmin -= 1.0;
      xmax += 1.0;
    }
    if (ymax - ymin <= 0.0) {
      ymin -= 1.0;
      ymax += 1.0;
    }
    const double pad = 8.0;
    const double sx = (right - left - 2 * pad) / (xmax - xmin);
    const double sy = (bottom - top - 2 * pad) / (ymax - ymin);
    for (std::size_t i = 0; i < n; ++i) {
      const double px = left + pad + (e.points[2 * i] - xmin) * sx;
      const double py = bottom - pad - (e.points[2 * i + 1] - ymin) * sy;
      const std::uint32_t label = i < e.labels.size() ? e.labels[i] : 0;
      canvas.disc(px, py, 3.0, detail::palette(label));
    }
  }

  int ly = top + 4;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    canvas.rect(right + 12, ly, right + 23, ly + 11, detail::palette(static_cast<std::uint32_t>(c)));
    canvas.text(right + 30, ly, class_names[c].substr(0, 11), black, 2);
    ly += 20;
  }
  return canvas.image();
}

inline void render_scatter(const Embedding2D& e, std::span<const std::string> class_names,
                           const std::string& path) {
  write_png(path, scatter_image(e, class_names));
}

// `sample_id,x,y,class_name`, one line per point.
inline std::string embedding_csv(const Embedding2D& e, std::span<const std::string> class_names) {
  std::ostringstream o;
  o << "sample_id,x,y,class_name\n";
  char buf[64];
  for (std::size_t i = 0; i < e.size(); ++i) {
    const std::uint64_t id = i < e.sample_ids.size() ? e.sample_ids[i] : i;
    const std::uint32_t label = i < e.labels.size() ? e.labels[i] : 0;
    o << id;
    std::snprintf(buf, sizeof buf, ",%.9g,%.9g,", e.points[2 * i], e.points[2 * i + 1]);
    o << buf << (label < class_names.size() ? class_names[label] : std::to_string(label)) << "\n";
  }
  return o.str();
}

}  // namespace fusionpool
