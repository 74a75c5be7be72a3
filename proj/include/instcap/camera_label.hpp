// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "instcap/error.hpp"

namespace instcap {

/// Basic camera movement. Directions are camera-centric: scene content
/// sliding right in the image means the camera panned left.
enum class CameraMotion {
  Static,
  PanLeft,
  PanRight,
  TiltUp,
  TiltDown,
  ZoomIn,
  ZoomOut,
  RotateCw,
  RotateCcw,
  Unknown,
};

inline constexpr std::array<CameraMotion, 10> kAllCameraMotions = {
    CameraMotion::Static, CameraMotion::PanLeft,  CameraMotion::PanRight, CameraMotion::TiltUp,
    CameraMotion::TiltDown, CameraMotion::ZoomIn, CameraMotion::ZoomOut,  CameraMotion::RotateCw,
    CameraMotion::RotateCcw, CameraMotion::Unknown};

inline std::string_view to_string(CameraMotion m) {
  switch (m) {
    case CameraMotion::Static: return "static";
    case CameraMotion::PanLeft: return "pan_left";
    case CameraMotion::PanRight: return "pan_right";
    case CameraMotion::TiltUp: return "tilt_up";
    case CameraMotion::TiltDown: return "tilt_down";
    case CameraMotion::ZoomIn: return "zoom_in";
    case CameraMotion::ZoomOut: return "zoom_out";
    case CameraMotion::RotateCw: return "rotate_cw";
    case CameraMotion::RotateCcw: return "rotate_ccw";
    case CameraMotion::Unknown: return "unknown";
  }
  return "unknown";
}

inline std::optional<CameraMotion> camera_motion_from_string(std::string_view s) {
  for (auto m : kAllCameraMotions)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

/// A classified movement plus its mean displacement in pixels per frame.
struct CameraMotionLabel {
  CameraMotion motion = CameraMotion::Unknown;
  double magnitude = 0.0;
};

}  // namespace instcap
