// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace instcap {

/// Duration, frame count, rate and the timestamps of the sampled frames.
struct TemporalMetadata {
  double duration = 0.0;  ///< seconds
  int64_t frame_count = 0;
  double fps = 0.0;
  std::vector<double> timestamps;  ///< seconds, one per sampled frame

  bool operator==(const TemporalMetadata&) const = default;
};

inline nlohmann::ordered_json to_json(const TemporalMetadata& m) {
  nlohmann::ordered_json j;
  j["duration"] = m.duration;
  j["frame_count"] = m.frame_count;
  j["fps"] = m.fps;
  j["timestamps"] = m.timestamps;
  return j;
}

}  // namespace instcap
