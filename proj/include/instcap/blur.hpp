// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "instcap/error.hpp"
#include "instcap/image.hpp"

namespace instcap {

inline constexpr double kDefaultBlurSigma = 9.0;

/// Reflect-101 border handling: ... c b | a b c ... | b a ...
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Normalised 1-D Gaussian taps, radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::PreconditionError, "blur sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with reflected borders.
inline Image gaussian_blur(const Image& src, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = src.width, h = src.height;
  std::vector<double> tmp(static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) acc += k[t + r] * src.at(reflect_index(x + t, w), y)[c];
        tmp[(static_cast<size_t>(y) * w + x) * 3 + c] = acc;
      }
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t)
          acc += k[t + r] * tmp[(static_cast<size_t>(reflect_index(y + t, h)) * w + x) * 3 + c];
        out.at(x, y)[c] = static_cast<uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
  return out;
}

inline void check_same_size(const Image& f, const Mask& m) {
  if (f.width != m.width || f.height != m.height)
    throw Error(ErrorKind::DimensionMismatch, "mask " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                                                  " does not match frame " + std::to_string(f.width) + "x" +
                                                  std::to_string(f.height));
}

/// Keeps masked pixels untouched and replaces the rest with a blur of the
/// whole frame.
inline Image blur_composite(const Image& frame, const Mask& mask, double sigma = kDefaultBlurSigma) {
  check_same_size(frame, mask);
  if (!(sigma > 0.0)) throw Error(ErrorKind::PreconditionError, "blur sigma must be > 0");
  bool all_kept = true;
  for (auto b : mask.bits) all_kept = all_kept && b;
  if (all_kept) return frame;
  Image out = gaussian_blur(frame, sigma);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      if (mask.get(x, y)) std::copy_n(frame.at(x, y), 3, out.at(x, y));
  return out;
}

/// Occludes everything outside the mask with pure red.
inline Image red_screen_composite(const Image& frame, const Mask& mask) {
  check_same_size(frame, mask);
  Image out = frame;
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      if (!mask.get(x, y)) {
        auto* p = out.at(x, y);
        p[0] = 255;
        p[1] = 0;
        p[2] = 0;
      }
  return out;
}

/// Draws the mask's bounding rectangle (red, `thickness` px) on an
/// otherwise unmodified frame.
inline Image bbox_overlay(const Image& frame, const Mask& mask, int thickness = 2) {
  check_same_size(frame, mask);
  Image out = frame;
  auto box = mask.bounding_box();
  if (!box) return out;
  for (int y = box->y0; y < box->y1; ++y)
    for (int x = box->x0; x < box->x1; ++x) {
      bool edge = x < box->x0 + thickness || x >= box->x1 - thickness || y < box->y0 + thickness ||
                  y >= box->y1 - thickness;
      if (!edge) continue;
      auto* p = out.at(x, y);
      p[0] = 255;
      p[1] = 0;
      p[2] = 0;
    }
  return out;
}

enum class VisualPrompt { Blur, RedScreen, BboxOverlay };

inline std::string_view to_string(VisualPrompt v) {
  switch (v) {
    case VisualPrompt::Blur: return "blur";
    case VisualPrompt::RedScreen: return "red-screen";
    case VisualPrompt::BboxOverlay: return "bbox-overlay";
  }
  return "blur";
}

inline std::optional<VisualPrompt> visual_prompt_from_string(std::string_view s) {
  if (s == "blur") return VisualPrompt::Blur;
  if (s == "red-screen") return VisualPrompt::RedScreen;
  if (s == "bbox-overlay") return VisualPrompt::BboxOverlay;
  return std::nullopt;
}

inline Image apply_visual_prompt(VisualPrompt mode, const Image& frame, const Mask& mask, double sigma) {
  switch (mode) {
    case VisualPrompt::Blur: return blur_composite(frame, mask, sigma);
    case VisualPrompt::RedScreen: return red_screen_composite(frame, mask);
    case VisualPrompt::BboxOverlay: return bbox_overlay(frame, mask);
  }
  return frame;
}

}  // namespace instcap
