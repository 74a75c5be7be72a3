// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "instcap/camera_label.hpp"
#include "instcap/error.hpp"
#include "instcap/image.hpp"

namespace instcap {

struct FlowVector {
  double dx = 0.0;
  double dy = 0.0;
  bool operator==(const FlowVector&) const = default;
};

/// Block displacements on a grid x grid layout, row-major. A vector is the
/// motion of image content from the first frame to the second.
struct FlowField {
  int grid = 0;
  int width = 0;   ///< source image width
  int height = 0;  ///< source image height
  double frame_gap = 1.0;  ///< source frames between the two sampled frames
  std::vector<FlowVector> vectors;

  const FlowVector& at(int col, int row) const { return vectors[static_cast<size_t>(row) * grid + col]; }
  FlowVector& at(int col, int row) { return vectors[static_cast<size_t>(row) * grid + col]; }

  /// Block centre relative to the image centre.
  FlowVector center(int col, int row) const {
    const double bw = static_cast<double>(width / grid), bh = static_cast<double>(height / grid);
    return {(col + 0.5) * bw - 0.5 * bw * grid, (row + 0.5) * bh - 0.5 * bh * grid};
  }

  static FlowField uniform(int grid, int width, int height, FlowVector v) {
    FlowField f{grid, width, height, 1.0, std::vector<FlowVector>(static_cast<size_t>(grid) * grid, v)};
    return f;
  }
};

struct FlowOptions {
  int grid = 16;
  int search_radius = 8;
};

namespace detail {
inline std::vector<double> luma(const Image& img) {
  std::vector<double> out(static_cast<size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto* p = img.at(x, y);
      out[static_cast<size_t>(y) * img.width + x] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  return out;
}
}  // namespace detail

/// Exhaustive block matching on luma. The cost of a candidate displacement is
/// the mean absolute difference over block pixels whose target stays inside
/// the frame; candidates covering less than half the block are skipped. Ties
/// go to the shorter displacement.
inline FlowField estimate_global_flow(const Image& a, const Image& b, const FlowOptions& opt = {}) {
  if (a.width != b.width || a.height != b.height)
    throw Error(ErrorKind::DimensionMismatch, "flow frames differ in size");
  if (opt.grid < 2) throw Error(ErrorKind::PreconditionError, "flow grid must be >= 2");
  if (a.width < opt.grid || a.height < opt.grid)
    throw Error(ErrorKind::DimensionMismatch, "frame smaller than the flow grid");
  const int w = a.width, h = a.height;
  const int bw = w / opt.grid, bh = h / opt.grid;
  const int r = opt.search_radius;
  const auto la = detail::luma(a), lb = detail::luma(b);

  FlowField field{opt.grid, w, h, 1.0, std::vector<FlowVector>(static_cast<size_t>(opt.grid) * opt.grid)};
  for (int row = 0; row < opt.grid; ++row)
    for (int col = 0; col < opt.grid; ++col) {
      const int x0 = col * bw, y0 = row * bh;
      double best = std::numeric_limits<double>::infinity();
      int best_d2 = 0;
      FlowVector best_v{};
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          double sad = 0.0;
          int count = 0;
          for (int y = y0; y < y0 + bh; ++y) {
            const int ty = y + dy;
            if (ty < 0 || ty >= h) continue;
            for (int x = x0; x < x0 + bw; ++x) {
              const int tx = x + dx;
              if (tx < 0 || tx >= w) continue;
              sad += std::abs(la[static_cast<size_t>(y) * w + x] - lb[static_cast<size_t>(ty) * w + tx]);
              ++count;
            }
          }
          if (2 * count < bw * bh) continue;
          const double cost = sad / count;
          const int d2 = dx * dx + dy * dy;
          if (cost < best - 1e-12 || (std::abs(cost - best) <= 1e-12 && d2 < best_d2)) {
            best = cost;
            best_d2 = d2;
            best_v = {static_cast<double>(dx), static_cast<double>(dy)};
          }
        }
      field.at(col, row) = best_v;
    }
  return field;
}

/// Similarity-model fit of a flow field: translation, divergence (uniform
/// scaling rate) and curl (rotation rate), all per source frame.
struct FlowDecomposition {
  double tx = 0.0;
  double ty = 0.0;
  double divergence = 0.0;
  double curl = 0.0;
  double mean_magnitude = 0.0;
  double mean_radius = 0.0;
};

inline FlowDecomposition decompose_flow(const FlowField& f) {
  FlowDecomposition d;
  const size_t n = f.vectors.size();
  if (n == 0) return d;
  const double gap = f.frame_gap > 0 ? f.frame_gap : 1.0;
  for (const auto& v : f.vectors) {
    d.tx += v.dx / gap;
    d.ty += v.dy / gap;
    d.mean_magnitude += std::hypot(v.dx, v.dy) / gap;
  }
  d.tx /= n;
  d.ty /= n;
  d.mean_magnitude /= n;
  double num_div = 0.0, num_curl = 0.0, den = 0.0;
  for (int row = 0; row < f.grid; ++row)
    for (int col = 0; col < f.grid; ++col) {
      const auto c = f.center(col, row);
      const auto& v = f.at(col, row);
      const double u = v.dx / gap - d.tx, w = v.dy / gap - d.ty;
      num_div += c.dx * u + c.dy * w;
      num_curl += c.dx * w - c.dy * u;
      den += c.dx * c.dx + c.dy * c.dy;
      d.mean_radius += std::hypot(c.dx, c.dy);
    }
  d.mean_radius /= n;
  if (den > 0) {
    d.divergence = num_div / den;
    d.curl = num_curl / den;
  }
  return d;
}

/// Element-wise mean of fields normalised to displacement per source frame.
inline FlowField average_flow(const std::vector<FlowField>& flows) {
  if (flows.empty()) throw Error(ErrorKind::EmptyInput, "no flow fields to average");
  const auto& first = flows.front();
  FlowField mean{first.grid, first.width, first.height, 1.0, std::vector<FlowVector>(first.vectors.size())};
  for (const auto& f : flows) {
    if (f.grid != first.grid || f.width != first.width || f.height != first.height ||
        f.vectors.size() != first.vectors.size())
      throw Error(ErrorKind::DimensionMismatch, "flow fields have different layouts");
    const double gap = f.frame_gap > 0 ? f.frame_gap : 1.0;
    for (size_t i = 0; i < f.vectors.size(); ++i) {
      if (!std::isfinite(f.vectors[i].dx) || !std::isfinite(f.vectors[i].dy))
        throw Error(ErrorKind::PreconditionError, "flow field contains non-finite values");
      mean.vectors[i].dx += f.vectors[i].dx / gap / flows.size();
      mean.vectors[i].dy += f.vectors[i].dy / gap / flows.size();
    }
  }
  return mean;
}

struct CameraThresholds {
  double static_px_per_frame = 0.5;
  double margin = 0.2;  ///< relative gap required between the top two scores
};

/// Time-averages the fields and picks the dominant component. Translation,
/// zoom and rotation are scored in pixels per frame (zoom and rotation at
/// the mean block radius).
inline CameraMotionLabel classify_camera_motion(const std::vector<FlowField>& flows,
                                                const CameraThresholds& th = {}) {
  if (flows.empty()) throw Error(ErrorKind::EmptyInput, "camera classification needs at least one flow field");
  const auto d = decompose_flow(average_flow(flows));
  CameraMotionLabel label{CameraMotion::Static, d.mean_magnitude};
  if (d.mean_magnitude < th.static_px_per_frame) return label;

  const double trans = std::hypot(d.tx, d.ty);
  const double zoom = std::abs(d.divergence) * d.mean_radius;
  const double rot = std::abs(d.curl) * d.mean_radius;

  double top = trans, second = std::max(zoom, rot);
  CameraMotion motion;
  if (std::abs(d.tx) >= std::abs(d.ty))
    motion = d.tx > 0 ? CameraMotion::PanLeft : CameraMotion::PanRight;
  else
    motion = d.ty > 0 ? CameraMotion::TiltUp : CameraMotion::TiltDown;
  if (zoom > top) {
    second = std::max(trans, rot);
    top = zoom;
    motion = d.divergence > 0 ? CameraMotion::ZoomIn : CameraMotion::ZoomOut;
  }
  if (rot > top) {
    second = std::max(trans, zoom);
    top = rot;
    // Content turning clockwise on screen (y down) means the camera rolled
    // counter-clockwise.
    motion = d.curl > 0 ? CameraMotion::RotateCcw : CameraMotion::RotateCw;
  }
  label.motion = (top - second < th.margin * top) ? CameraMotion::Unknown : motion;
  return label;
}

}  // namespace instcap
