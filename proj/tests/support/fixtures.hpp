// Synthetic images and clips shared by the tests.
#pragma once

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "instcap/image.hpp"
#include "instcap/png_io.hpp"
#include "instcap/video_ingest.hpp"

namespace fixtures {

using instcap::Image;

inline std::filesystem::path source_dir() { return INSTCAP_SOURCE_DIR; }

/// Smooth value noise plus fine grain; deterministic for a seed.
/// Uses raw mt19937 output only, which the standard pins down.
class Texture {
 public:
  Texture(int w, int h, uint32_t seed, int cell = 6) : w_(w), h_(h), cell_(cell) {
    std::mt19937 rng(seed);
    gw_ = w / cell + 2;
    gh_ = h / cell + 2;
    coarse_.resize(static_cast<size_t>(gw_) * gh_ * 3);
    for (auto& v : coarse_) v = static_cast<int>(rng() % 200) + 20;
    fine_.resize(static_cast<size_t>(w) * h);
    for (auto& v : fine_) v = static_cast<int>(rng() % 41) - 20;
  }

  /// Colour at real coordinates (bilinear coarse layer, nearest fine layer).
  std::array<uint8_t, 3> sample(double x, double y) const {
    x = std::clamp(x, 0.0, w_ - 1.0);
    y = std::clamp(y, 0.0, h_ - 1.0);
    const double gx = x / cell_, gy = y / cell_;
    const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
    const double fx = gx - ix, fy = gy - iy;
    const int fine = fine_[static_cast<size_t>(std::lround(y)) * w_ + static_cast<size_t>(std::lround(x))];
    std::array<uint8_t, 3> out{};
    for (int c = 0; c < 3; ++c) {
      auto g = [&](int cx, int cy) { return coarse_[(static_cast<size_t>(cy) * gw_ + cx) * 3 + c]; };
      const double v = (1 - fx) * (1 - fy) * g(ix, iy) + fx * (1 - fy) * g(ix + 1, iy) + (1 - fx) * fy * g(ix, iy + 1) +
                       fx * fy * g(ix + 1, iy + 1);
      out[c] = static_cast<uint8_t>(std::clamp(std::lround(v) + fine, 0L, 255L));
    }
    return out;
  }

  int width() const { return w_; }
  int height() const { return h_; }

 private:
  int w_, h_, cell_, gw_, gh_;
  std::vector<int> coarse_, fine_;
};

/// `w` x `h` window of the texture with its top-left at (ox, oy).
inline Image crop(const Texture& t, int ox, int oy, int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto c = t.sample(ox + x, oy + y);
      for (int k = 0; k < 3; ++k) img.at(x, y)[k] = c[k];
    }
  return img;
}

/// Window scaled by `s` about its centre: content appears `s` times larger.
inline Image zoomed(const Texture& t, int ox, int oy, int w, int h, double s) {
  Image img(w, h);
  const double cx = ox + w / 2.0, cy = oy + h / 2.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto c = t.sample(cx + (ox + x - cx) / s, cy + (oy + y - cy) / s);
      for (int k = 0; k < 3; ++k) img.at(x, y)[k] = c[k];
    }
  return img;
}

inline Image random_image(int w, int h, uint32_t seed) {
  std::mt19937 rng(seed);
  Image img(w, h);
  for (auto& p : img.pixels) p = static_cast<uint8_t>(rng() & 0xFF);
  return img;
}

/// Moving-square clip: the background slides right by 2 px per frame (the
/// camera pans left) and a solid square moves down-right across it.
struct MovingSquare {
  static constexpr int kWidth = 160;
  static constexpr int kHeight = 128;
  static constexpr int kFrames = 16;
  static constexpr int kSide = 28;
  static constexpr double kFps = 8.0;

  static instcap::Box square_box(int64_t frame) {
    const int x0 = 40 + static_cast<int>(3 * frame), y0 = 30 + static_cast<int>(2 * frame);
    return {x0, y0, x0 + kSide, y0 + kSide};
  }

  static Image frame(int64_t t) {
    static const Texture tex(kWidth + 2 * kFrames + 16, kHeight + 16, 20241019u);
    Image img = crop(tex, 2 * kFrames + 8 - 2 * static_cast<int>(t), 8, kWidth, kHeight);
    const auto b = square_box(t);
    for (int y = b.y0; y < b.y1; ++y)
      for (int x = b.x0; x < b.x1; ++x) {
        img.at(x, y)[0] = 230;
        img.at(x, y)[1] = 40;
        img.at(x, y)[2] = 40;
      }
    return img;
  }

  /// Writes `%06d.png` frames and meta.json into `dir`.
  static void write(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (int t = 0; t < kFrames; ++t) instcap::png::write(instcap::ImageDirectoryProvider::frame_path(dir, t), frame(t));
    std::ofstream(dir / "meta.json") << "{\"fps\": " << kFps << "}\n";
  }
};

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("instcap_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
