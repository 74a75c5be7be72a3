// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "instcap/blur.hpp"
#include "instcap/camera_label.hpp"
#include "instcap/concurrency.hpp"
#include "instcap/error.hpp"
#include "instcap/flow.hpp"
#include "instcap/model_adapter.hpp"
#include "instcap/png_io.hpp"
#include "instcap/video_ingest.hpp"

namespace instcap {

enum class FlowSource { Internal, Adapter };

struct AmcConfig {
  double confidence_threshold = 0.5;
  size_t max_instances = 6;
  double blur_sigma = kDefaultBlurSigma;
  VisualPrompt visual_prompt = VisualPrompt::Blur;
  FlowSource flow_source = FlowSource::Internal;
  FlowOptions flow;
  CameraThresholds camera;
  size_t workers = 4;
};

/// One isolated instance: its clip with the background suppressed according
/// to the visual-prompt mode, and the mask track it came from.
struct InstanceAssets {
  std::string instance_id;
  std::string class_name;
  double confidence = 0.0;
  FrameSequence blurred_clip;
  MaskTrack track;
};

struct AmcResult {
  std::vector<InstanceAssets> assets;  ///< descending detector confidence
  CameraMotionLabel camera;
  FlowDecomposition camera_fit;
  std::vector<Detection> raw_detections;
};

namespace detail {
template <typename Fn>
auto adapter_call(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string(what) + ": " + e.what());
  }
}
}  // namespace detail

/// Flow between consecutive sampled frames, normalised by their index gap.
inline std::vector<FlowField> sequence_flows(const FrameSequence& frames, ModelAdapter* adapter, const AmcConfig& cfg) {
  std::vector<FlowField> flows;
  for (size_t i = 1; i < frames.size(); ++i) {
    const auto& a = frames.frames[i - 1];
    const auto& b = frames.frames[i];
    FlowField f = (cfg.flow_source == FlowSource::Adapter && adapter)
                      ? detail::adapter_call("flow", [&] { return adapter->flow(a.image, b.image, cfg.flow.grid); })
                      : estimate_global_flow(a.image, b.image, cfg.flow);
    f.frame_gap = static_cast<double>(std::max<int64_t>(1, b.index - a.index));
    flows.push_back(std::move(f));
  }
  return flows;
}

inline AmcResult run_amc(const FrameSequence& frames, ModelAdapter& adapter, const AmcConfig& cfg = {}) {
  if (frames.empty()) throw Error(ErrorKind::NoFrames, "AMC received no frames");
  const int w = frames.width(), h = frames.height();

  AmcResult result;
  result.raw_detections = detail::adapter_call("detect", [&] { return adapter.detect(frames.frames.front().image); });
  std::vector<Detection> kept;
  for (const auto& d : result.raw_detections) {
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
      throw Error(ErrorKind::AdapterError, "detection confidence outside [0, 1]");
    if (!d.bbox.valid_in(w, h)) throw Error(ErrorKind::AdapterError, "detection box outside the frame");
    if (d.confidence >= cfg.confidence_threshold) kept.push_back(d);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  if (kept.size() > cfg.max_instances) kept.resize(cfg.max_instances);

  if (!kept.empty()) {
    std::vector<Box> seeds;
    for (const auto& d : kept) seeds.push_back(d.bbox);
    auto tracks = detail::adapter_call("segment", [&] { return adapter.segment(frames, seeds); });
    if (tracks.size() != kept.size())
      throw Error(ErrorKind::AdapterError, "segmenter returned " + std::to_string(tracks.size()) + " tracks for " +
                                               std::to_string(kept.size()) + " seeds");
    result.assets.resize(kept.size());
    for (size_t i = 0; i < kept.size(); ++i) {
      auto& track = tracks[i];
      if (track.masks.size() != frames.size())
        throw Error(ErrorKind::AdapterError, "mask count does not match sampled frame count");
      track.instance_id = "i" + std::to_string(i);
      track.boxes.clear();
      for (const auto& m : track.masks) {
        if (m.width != w || m.height != h) throw Error(ErrorKind::AdapterError, "mask size does not match frames");
        track.boxes.push_back(m.bounding_box());
      }
      auto& asset = result.assets[i];
      asset.instance_id = track.instance_id;
      asset.class_name = kept[i].class_name;
      asset.confidence = kept[i].confidence;
      asset.blurred_clip.source_id = "instance_" + asset.instance_id;
      asset.blurred_clip.frames.resize(frames.size());
      asset.track = std::move(track);
    }
    const size_t jobs = kept.size() * frames.size();
    parallel_for(jobs, cfg.workers, [&](size_t job) {
      auto& asset = result.assets[job / frames.size()];
      const size_t fi = job % frames.size();
      const auto& src = frames.frames[fi];
      asset.blurred_clip.frames[fi] =
          Frame{src.index, apply_visual_prompt(cfg.visual_prompt, src.image, asset.track.masks[fi], cfg.blur_sigma),
                src.timestamp};
    });
  }

  if (frames.size() >= 2) {
    const auto flows = sequence_flows(frames, &adapter, cfg);
    result.camera = classify_camera_motion(flows, cfg.camera);
    result.camera_fit = decompose_flow(average_flow(flows));
  } else {
    result.camera = CameraMotionLabel{CameraMotion::Unknown, 0.0};
  }
  return result;
}

inline void write_frames(const std::filesystem::path& dir, const FrameSequence& seq) {
  std::filesystem::create_directories(dir);
  for (const auto& f : seq.frames) png::write(ImageDirectoryProvider::frame_path(dir, f.index), f.image);
}

inline nlohmann::ordered_json amc_result_json(const AmcResult& r, const AmcConfig& cfg) {
  nlohmann::ordered_json j;
  j["detections"] = nlohmann::ordered_json::array();
  for (const auto& d : r.raw_detections)
    j["detections"].push_back({{"class_name", d.class_name}, {"confidence", d.confidence},
                               {"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}}});
  j["instances"] = nlohmann::ordered_json::array();
  for (const auto& a : r.assets) {
    nlohmann::ordered_json boxes = nlohmann::ordered_json::array();
    for (size_t i = 0; i < a.track.boxes.size(); ++i) {
      const auto& b = a.track.boxes[i];
      boxes.push_back({{"frame_index", a.blurred_clip.frames[i].index},
                       {"bbox", b ? nlohmann::ordered_json{b->x0, b->y0, b->x1, b->y1} : nlohmann::ordered_json(nullptr)}});
    }
    j["instances"].push_back({{"id", a.instance_id},
                              {"class_name", a.class_name},
                              {"confidence", a.confidence},
                              {"clip_dir", a.blurred_clip.source_id},
                              {"boxes", boxes}});
  }
  j["camera"] = {{"label", std::string(to_string(r.camera.motion))},
                 {"magnitude", r.camera.magnitude},
                 {"translation", {r.camera_fit.tx, r.camera_fit.ty}},
                 {"divergence", r.camera_fit.divergence},
                 {"curl", r.camera_fit.curl}};
  j["config"] = {{"confidence_threshold", cfg.confidence_threshold},
                 {"max_instances", cfg.max_instances},
                 {"blur_sigma", cfg.blur_sigma},
                 {"visual_prompt", std::string(to_string(cfg.visual_prompt))},
                 {"flow_source", cfg.flow_source == FlowSource::Internal ? "internal" : "adapter"},
                 {"flow_grid", cfg.flow.grid},
                 {"search_radius", cfg.flow.search_radius},
                 {"static_threshold", cfg.camera.static_px_per_frame},
                 {"margin", cfg.camera.margin}};
  return j;
}

/// Writes `instance_<id>/%06d.png` for every asset and `amc_result.json`.
inline void write_amc_artifacts(const std::filesystem::path& dir, const AmcResult& r, const AmcConfig& cfg) {
  std::filesystem::create_directories(dir);
  for (const auto& a : r.assets) write_frames(dir / a.blurred_clip.source_id, a.blurred_clip);
  std::ofstream out(dir / "amc_result.json");
  out << amc_result_json(r, cfg).dump(2) << "\n";
}

}  // namespace instcap
