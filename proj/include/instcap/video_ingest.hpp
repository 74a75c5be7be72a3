// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "instcap/error.hpp"
#include "instcap/image.hpp"
#include "instcap/png_io.hpp"
#include "instcap/temporal_metadata.hpp"

namespace instcap {

inline constexpr int kDefaultSampledFrames = 8;

struct Frame {
  int64_t index = 0;
  Image image;
  double timestamp = 0.0;
  bool operator==(const Frame&) const = default;
};

/// Ordered frames sharing one size. `source_id` names where the frames live
/// (e.g. "frames" or "instance_i0") and is used to build image references.
struct FrameSequence {
  std::string source_id = "frames";
  std::vector<Frame> frames;

  bool empty() const { return frames.empty(); }
  size_t size() const { return frames.size(); }
  int width() const { return frames.empty() ? 0 : frames.front().image.width; }
  int height() const { return frames.empty() ? 0 : frames.front().image.height; }
};

/// What a provider can tell about a source without decoding pixels.
struct VideoInfo {
  int64_t frame_count = 0;
  double fps = 0.0;
  std::optional<double> duration;
};

class FrameProvider {
 public:
  virtual ~FrameProvider() = default;
  virtual VideoInfo probe(const std::string& video) const = 0;
  virtual std::vector<Image> read_frames(const std::string& video, const std::vector<int64_t>& indices) const = 0;
};

/// A directory of `%06d.png` files plus an optional `meta.json`
/// (`{"fps": ..., "duration": ...}`).
class ImageDirectoryProvider : public FrameProvider {
 public:
  explicit ImageDirectoryProvider(double default_fps = 30.0) : default_fps_(default_fps) {}

  static std::filesystem::path frame_path(const std::filesystem::path& dir, int64_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "%06lld.png", static_cast<long long>(index));
    return dir / name;
  }

  VideoInfo probe(const std::string& video) const override {
    const std::filesystem::path dir(video);
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec))
      throw Error(ErrorKind::DecodeError, "not a frame directory: " + video);
    VideoInfo info;
    info.fps = default_fps_;
    while (std::filesystem::exists(frame_path(dir, info.frame_count))) ++info.frame_count;
    if (auto meta = dir / "meta.json"; std::filesystem::exists(meta)) {
      try {
        std::ifstream in(meta);
        auto j = nlohmann::json::parse(in);
        if (j.contains("fps")) info.fps = j.at("fps").get<double>();
        if (j.contains("duration") && !j.at("duration").is_null()) info.duration = j.at("duration").get<double>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::DecodeError, "bad meta.json in " + video + ": " + e.what());
      }
    }
    return info;
  }

  std::vector<Image> read_frames(const std::string& video, const std::vector<int64_t>& indices) const override {
    std::vector<Image> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(png::read(frame_path(video, i)));
    return out;
  }

 private:
  double default_fps_;
};

/// Shells out to a decoder. Templates use `{input}`, `{output_dir}` and
/// `{indices}` (comma-separated). The probe command prints
/// `{"frame_count": F, "fps": R, "duration": D?}` on stdout; the extract
/// command writes `<output_dir>/%06d.png` for each requested index.
class ExternalDecoderProvider : public FrameProvider {
 public:
  ExternalDecoderProvider(std::string probe_template, std::string extract_template,
                          std::filesystem::path scratch_root = std::filesystem::temp_directory_path())
      : probe_template_(std::move(probe_template)),
        extract_template_(std::move(extract_template)),
        scratch_root_(std::move(scratch_root)) {}

  VideoInfo probe(const std::string& video) const override {
    const auto cmd = fill(probe_template_, video, "", {});
    std::string out;
    {
      std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), ::pclose);
      if (!pipe) throw Error(ErrorKind::DecodeError, "cannot run probe command");
      char buf[4096];
      size_t n;
      while ((n = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) out.append(buf, n);
      int status = ::pclose(pipe.release());
      if (status != 0) throw Error(ErrorKind::DecodeError, "probe command failed for " + video);
    }
    try {
      auto j = nlohmann::json::parse(out);
      VideoInfo info;
      info.frame_count = j.at("frame_count").get<int64_t>();
      info.fps = j.at("fps").get<double>();
      if (j.contains("duration") && !j["duration"].is_null()) info.duration = j["duration"].get<double>();
      return info;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::DecodeError, "unparseable probe output for " + video + ": " + e.what());
    }
  }

  std::vector<Image> read_frames(const std::string& video, const std::vector<int64_t>& indices) const override {
    std::random_device rd;
    const auto dir = scratch_root_ / ("instcap_decode_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(dir);
    struct Cleanup {
      std::filesystem::path p;
      ~Cleanup() {
        std::error_code ec;
        std::filesystem::remove_all(p, ec);
      }
    } cleanup{dir};
    const auto cmd = fill(extract_template_, video, dir.string(), indices);
    if (std::system(cmd.c_str()) != 0) throw Error(ErrorKind::DecodeError, "extract command failed for " + video);
    std::vector<Image> out;
    for (auto i : indices) {
      auto p = ImageDirectoryProvider::frame_path(dir, i);
      if (!std::filesystem::exists(p))
        throw Error(ErrorKind::DecodeError, "decoder did not produce frame " + std::to_string(i));
      out.push_back(png::read(p));
    }
    return out;
  }

 private:
  static std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += (c == '\'') ? std::string("'\\''") : std::string(1, c);
    return q + "'";
  }

  static std::string fill(std::string tpl, const std::string& input, const std::string& outdir,
                          const std::vector<int64_t>& indices) {
    std::string idx;
    for (size_t i = 0; i < indices.size(); ++i) idx += (i ? "," : "") + std::to_string(indices[i]);
    auto sub = [&](const std::string& key, const std::string& val) {
      for (size_t p; (p = tpl.find(key)) != std::string::npos;) tpl.replace(p, key.size(), val);
    };
    sub("{input}", quote(input));
    sub("{output_dir}", quote(outdir));
    sub("{indices}", idx);
    return tpl;
  }

  std::string probe_template_;
  std::string extract_template_;
  std::filesystem::path scratch_root_;
};

/// Holds decoded clips in memory, keyed by name. Used by tests and the
/// synthetic fixtures.
class InMemoryProvider : public FrameProvider {
 public:
  void add(const std::string& name, std::vector<Image> frames, double fps) {
    clips_[name] = Clip{std::move(frames), fps};
  }

  VideoInfo probe(const std::string& video) const override {
    auto it = clips_.find(video);
    if (it == clips_.end()) throw Error(ErrorKind::DecodeError, "unknown in-memory clip " + video);
    return VideoInfo{static_cast<int64_t>(it->second.frames.size()), it->second.fps, std::nullopt};
  }

  std::vector<Image> read_frames(const std::string& video, const std::vector<int64_t>& indices) const override {
    auto it = clips_.find(video);
    if (it == clips_.end()) throw Error(ErrorKind::DecodeError, "unknown in-memory clip " + video);
    std::vector<Image> out;
    for (auto i : indices) {
      if (i < 0 || i >= static_cast<int64_t>(it->second.frames.size()))
        throw Error(ErrorKind::DecodeError, "frame index out of range");
      out.push_back(it->second.frames[i]);
    }
    return out;
  }

 private:
  struct Clip {
    std::vector<Image> frames;
    double fps;
  };
  std::map<std::string, Clip> clips_;
};

/// Uniform sampling: idx_k = round_half_up(k (F-1) / (n-1)), deduplicated.
inline std::vector<int64_t> sample_indices(int64_t frame_count, int n) {
  if (n < 1) throw Error(ErrorKind::PreconditionError, "sample count must be >= 1");
  if (frame_count < 1) throw Error(ErrorKind::DecodeError, "source has no frames");
  std::vector<int64_t> out;
  if (n == 1) return {0};
  const int64_t den = 2 * static_cast<int64_t>(n - 1);
  for (int64_t k = 0; k < n; ++k) {
    const int64_t idx = (2 * k * (frame_count - 1) + (n - 1)) / den;
    if (out.empty() || out.back() != idx) out.push_back(idx);
  }
  return out;
}

inline TemporalMetadata extract_metadata(const FrameProvider& provider, const std::string& video,
                                         int n = kDefaultSampledFrames) {
  const auto info = provider.probe(video);
  if (info.frame_count <= 0) throw Error(ErrorKind::DecodeError, "source has no frames: " + video);
  if (!(info.fps > 0.0)) throw Error(ErrorKind::DecodeError, "source has no valid frame rate: " + video);
  TemporalMetadata m;
  m.frame_count = info.frame_count;
  m.fps = info.fps;
  m.duration = info.duration.value_or(static_cast<double>(info.frame_count) / info.fps);
  for (auto idx : sample_indices(info.frame_count, n)) m.timestamps.push_back(static_cast<double>(idx) / info.fps);
  return m;
}

inline FrameSequence sample_frames(const FrameProvider& provider, const std::string& video,
                                   int n = kDefaultSampledFrames) {
  const auto info = provider.probe(video);
  if (info.frame_count <= 0) throw Error(ErrorKind::DecodeError, "source has no frames: " + video);
  if (!(info.fps > 0.0)) throw Error(ErrorKind::DecodeError, "source has no valid frame rate: " + video);
  const auto indices = sample_indices(info.frame_count, n);
  auto images = provider.read_frames(video, indices);
  if (images.size() != indices.size()) throw Error(ErrorKind::DecodeError, "provider returned wrong frame count");
  FrameSequence seq;
  for (size_t i = 0; i < indices.size(); ++i) {
    if (images[i].empty() || (i > 0 && (images[i].width != images[0].width || images[i].height != images[0].height)))
      throw Error(ErrorKind::DecodeError, "frames of " + video + " differ in size");
    seq.frames.push_back(Frame{indices[i], std::move(images[i]), static_cast<double>(indices[i]) / info.fps});
  }
  return seq;
}

}  // namespace instcap
