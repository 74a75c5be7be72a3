// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "instcap/error.hpp"

namespace instcap {

/// 8-bit interleaved RGB image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int w, int h, uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

  bool empty() const { return width == 0 || height == 0; }
  size_t index(int x, int y) const { return (static_cast<size_t>(y) * width + x) * 3; }
  uint8_t* at(int x, int y) { return pixels.data() + index(x, y); }
  const uint8_t* at(int x, int y) const { return pixels.data() + index(x, y); }

  bool operator==(const Image&) const = default;
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool valid_in(int w, int h) const { return 0 <= x0 && x0 < x1 && x1 <= w && 0 <= y0 && y0 < y1 && y1 <= h; }
  bool operator==(const Box&) const = default;
};

/// Binary mask, one byte per pixel holding 0 or 1.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> bits;

  Mask() = default;
  Mask(int w, int h, uint8_t fill = 0) : width(w), height(h), bits(static_cast<size_t>(w) * h, fill) {}

  uint8_t get(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
  void set(int x, int y, uint8_t v) { bits[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }

  static Mask from_box(int w, int h, const Box& b) {
    Mask m(w, h);
    for (int y = std::max(0, b.y0); y < std::min(h, b.y1); ++y)
      for (int x = std::max(0, b.x0); x < std::min(w, b.x1); ++x) m.set(x, y, 1);
    return m;
  }

  /// Tight bounding box, or nullopt for an empty mask.
  std::optional<Box> bounding_box() const {
    int x0 = width, y0 = height, x1 = -1, y1 = -1;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (get(x, y)) {
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x);
          y1 = std::max(y1, y);
        }
    if (x1 < 0) return std::nullopt;
    return Box{x0, y0, x1 + 1, y1 + 1};
  }

  Mask intersect(const Mask& o) const {
    if (o.width != width || o.height != height)
      throw Error(ErrorKind::DimensionMismatch, "mask intersection of different sizes");
    Mask m(width, height);
    for (size_t i = 0; i < bits.size(); ++i) m.bits[i] = bits[i] & o.bits[i];
    return m;
  }

  bool operator==(const Mask&) const = default;
};

}  // namespace instcap
