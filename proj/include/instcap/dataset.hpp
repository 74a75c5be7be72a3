// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "instcap/caption_schema.hpp"
#include "instcap/error.hpp"
#include "instcap/flow.hpp"
#include "instcap/text.hpp"
#include "instcap/video_ingest.hpp"

namespace instcap {

/// One manifest line. `raw` keeps the line's fields, including unknown
/// ones, so curated output round-trips.
struct ManifestRecord {
  std::string id;
  std::string path;
  double duration = 0.0;
  double fps = 0.0;
  std::optional<std::string> scene;
  std::optional<nlohmann::ordered_json> caption;  ///< path string or inline caption object
  std::optional<double> motion_intensity;
  nlohmann::ordered_json raw;

  bool operator==(const ManifestRecord& o) const { return raw == o.raw; }
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;  ///< resolves relative paths in records

  std::filesystem::path resolve(const std::string& p) const {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records) out += r.raw.dump() + "\n";
    return out;
  }
};

inline ManifestRecord parse_manifest_record(const nlohmann::ordered_json& j, const std::string& where) {
  auto fail = [&](const std::string& msg) { return Error(ErrorKind::ManifestParseError, where + ": " + msg); };
  if (!j.is_object()) throw fail("record is not a JSON object");
  ManifestRecord r;
  r.raw = j;
  try {
    r.id = j.at("id").get<std::string>();
    r.path = j.value("path", std::string{});
    r.duration = j.at("duration").get<double>();
    r.fps = j.value("fps", 0.0);
    if (j.contains("scene") && !j["scene"].is_null()) r.scene = j["scene"].get<std::string>();
    if (j.contains("caption") && !j["caption"].is_null()) r.caption = j["caption"];
    if (j.contains("motion_intensity") && !j["motion_intensity"].is_null()) r.motion_intensity = j["motion_intensity"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  if (r.id.empty()) throw fail("empty id");
  if (!(r.duration > 0) || !std::isfinite(r.duration)) throw fail("duration must be > 0");
  if (r.fps < 0 || !std::isfinite(r.fps)) throw fail("fps must be >= 0");
  if (r.motion_intensity && !(*r.motion_intensity >= 0)) throw fail("motion_intensity must be >= 0");
  return r;
}

/// Newline-delimited JSON; blank lines are skipped, ids must be unique.
inline Manifest parse_manifest(std::istream& in, const std::string& name = "manifest") {
  Manifest m;
  std::set<std::string> ids;
  std::string line;
  for (size_t n = 1; std::getline(in, line); ++n) {
    if (text::trim(line).empty()) continue;
    const auto where = name + ":" + std::to_string(n);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::ManifestParseError, where + ": " + e.what());
    }
    auto r = parse_manifest_record(j, where);
    if (!ids.insert(r.id).second) throw Error(ErrorKind::ManifestParseError, where + ": duplicate id " + r.id);
    m.records.push_back(std::move(r));
  }
  return m;
}

inline Manifest parse_manifest(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return parse_manifest(in);
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ManifestParseError, "cannot read manifest " + path.string());
  auto m = parse_manifest(in, path.filename().string());
  m.base_dir = path.parent_path();
  return m;
}

/// Mean flow magnitude, in pixels per source frame, over consecutive
/// sampled pairs.
inline double motion_intensity(const FrameSequence& frames, const FlowOptions& opt = {}) {
  if (frames.size() < 2) throw Error(ErrorKind::TooFewFrames, "motion intensity needs at least 2 frames");
  double sum = 0.0;
  for (size_t i = 0; i + 1 < frames.size(); ++i) {
    auto f = estimate_global_flow(frames.frames[i].image, frames.frames[i + 1].image, opt);
    f.frame_gap = static_cast<double>(std::max<int64_t>(1, frames.frames[i + 1].index - frames.frames[i].index));
    sum += decompose_flow(f).mean_magnitude;
  }
  return sum / static_cast<double>(frames.size() - 1);
}

struct CurationFilter {
  double min_duration = 2.0;
  double max_duration = 10.0;
  std::optional<double> min_motion;
  bool require_instance = false;

  void validate() const {
    if (min_duration > max_duration) throw Error(ErrorKind::ConfigError, "min duration exceeds max duration");
    if (min_motion && *min_motion < 0) throw Error(ErrorKind::ConfigError, "min motion must be >= 0");
  }
};

struct Rejection {
  std::string id;
  std::vector<std::string> reasons;  ///< duration, motion, instances
};

struct CurationResult {
  Manifest kept;
  std::vector<Rejection> rejected;
};

/// Loads a record's caption, inline or from a path. nullopt when absent or unreadable.
inline std::optional<StructuredCaption> record_caption(const Manifest& m, const ManifestRecord& r) {
  if (!r.caption) return std::nullopt;
  try {
    if (r.caption->is_string()) return load_caption(m.resolve(r.caption->get<std::string>()));
    return parse_caption(*r.caption);
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline std::vector<std::string> rejection_reasons(const Manifest& m, const ManifestRecord& r, const CurationFilter& f) {
  std::vector<std::string> reasons;
  if (r.duration < f.min_duration || r.duration > f.max_duration) reasons.push_back("duration");
  if (f.min_motion && (!r.motion_intensity || *r.motion_intensity < *f.min_motion)) reasons.push_back("motion");
  if (f.require_instance) {
    auto c = record_caption(m, r);
    if (!c || c->instances.empty()) reasons.push_back("instances");
  }
  return reasons;
}

/// Keeps records passing every clause, in input order.
inline CurationResult curate(const Manifest& m, const CurationFilter& f) {
  f.validate();
  CurationResult out;
  out.kept.base_dir = m.base_dir;
  for (const auto& r : m.records) {
    auto reasons = rejection_reasons(m, r, f);
    if (reasons.empty())
      out.kept.records.push_back(r);
    else
      out.rejected.push_back({r.id, std::move(reasons)});
  }
  return out;
}

struct DatasetStats {
  size_t records = 0;
  size_t short_clips = 0;   ///< (0, 2) s
  size_t target_clips = 0;  ///< [2, 10) s
  size_t long_clips = 0;    ///< [10, inf) s
  double total_duration = 0.0;
  std::map<std::string, size_t> scenes;   ///< "untagged" for records without a scene
  std::map<std::string, size_t> classes;  ///< instance classes over readable captions
  size_t captioned = 0;
};

inline DatasetStats dataset_stats(const Manifest& m) {
  DatasetStats s;
  for (const auto& r : m.records) {
    ++s.records;
    s.total_duration += r.duration;
    if (r.duration < 2.0)
      ++s.short_clips;
    else if (r.duration < 10.0)
      ++s.target_clips;
    else
      ++s.long_clips;
    ++s.scenes[r.scene.value_or("untagged")];
    if (auto c = record_caption(m, r)) {
      ++s.captioned;
      for (const auto& inst : c->instances) ++s.classes[text::to_lower(inst.class_name)];
    }
  }
  return s;
}

inline nlohmann::ordered_json to_json(const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["records"] = s.records;
  j["total_duration"] = s.total_duration;
  j["duration_buckets"] = {{"(0,2)", s.short_clips}, {"[2,10)", s.target_clips}, {"[10,inf)", s.long_clips}};
  j["scenes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.scenes) j["scenes"][k] = v;
  j["captioned"] = s.captioned;
  j["classes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : s.classes) j["classes"][k] = v;
  return j;
}

inline nlohmann::ordered_json to_json(const CurationResult& r) {
  nlohmann::ordered_json j;
  j["kept"] = r.kept.records.size();
  j["rejected"] = nlohmann::ordered_json::array();
  for (const auto& x : r.rejected) j["rejected"].push_back({{"id", x.id}, {"reasons", x.reasons}});
  return j;
}

}  // namespace instcap
