// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "instcap/error.hpp"
#include "instcap/flow.hpp"
#include "instcap/image.hpp"
#include "instcap/tensor.hpp"
#include "instcap/text.hpp"
#include "instcap/video_ingest.hpp"

namespace instcap {

struct Detection {
  std::string class_name;
  double confidence = 0.0;
  Box bbox;  ///< on the first sampled frame
  bool operator==(const Detection&) const = default;
};

/// Per-frame masks for one instance; `boxes[i]` is the tight box of
/// `masks[i]` (nullopt when the instance is not visible).
struct MaskTrack {
  std::string instance_id;
  std::vector<Mask> masks;
  std::vector<std::optional<Box>> boxes;
};

struct AdapterInfo {
  int embedding_dim = 0;
  std::vector<uint64_t> latent_shape;
  std::string backend;
};

/// The auxiliary-model surface: detection, mask propagation, embeddings,
/// autoencoder latents and, optionally, dense flow.
class ModelAdapter {
 public:
  virtual ~ModelAdapter() = default;
  virtual AdapterInfo info() = 0;
  virtual std::vector<Detection> detect(const Image& frame) = 0;
  /// One track per seed box, masks for every frame of `frames`.
  virtual std::vector<MaskTrack> segment(const FrameSequence& frames, const std::vector<Box>& seeds) = 0;
  virtual std::vector<float> embed_text(const std::string& text) = 0;
  virtual std::vector<float> embed_image(const Image& image) = 0;
  virtual LatentTensor vae_latent(const FrameSequence& frames) = 0;
  virtual FlowField flow(const Image&, const Image&, int /*grid*/) {
    throw Error(ErrorKind::AdapterError, "adapter does not provide flow");
  }
};

/// JSON encodings shared by the HTTP client and the mock server.
namespace wire {

using json = nlohmann::json;

inline json encode_image(const Image& img) {
  return {{"shape", {img.height, img.width, 3}},
          {"dtype", "uint8"},
          {"data", text::base64_encode(std::string_view(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size()))}};
}

inline Image decode_image(const json& j) {
  try {
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 3 || shape[2] != 3 || shape[0] <= 0 || shape[1] <= 0 || j.at("dtype") != "uint8")
      throw Error(ErrorKind::AdapterError, "image must be uint8 with shape [H, W, 3]");
    const auto bytes = text::base64_decode(j.at("data").get<std::string>());
    Image img(shape[1], shape[0]);
    if (bytes.size() != img.pixels.size()) throw Error(ErrorKind::AdapterError, "image payload size does not match shape");
    std::copy(bytes.begin(), bytes.end(), img.pixels.begin());
    return img;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed image: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed image data: ") + e.what());
  }
}

inline json encode_mask(const Mask& m) {
  return {{"shape", {m.height, m.width}},
          {"dtype", "uint8"},
          {"data", text::base64_encode(std::string_view(reinterpret_cast<const char*>(m.bits.data()), m.bits.size()))}};
}

inline Mask decode_mask(const json& j) {
  try {
    const auto shape = j.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0) throw Error(ErrorKind::AdapterError, "mask must have shape [H, W]");
    const auto bytes = text::base64_decode(j.at("data").get<std::string>());
    Mask m(shape[1], shape[0]);
    if (bytes.size() != m.bits.size()) throw Error(ErrorKind::AdapterError, "mask payload size does not match shape");
    for (size_t i = 0; i < bytes.size(); ++i) m.bits[i] = bytes[i] ? 1 : 0;
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed mask: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed mask data: ") + e.what());
  }
}

inline json encode_box(const Box& b) { return {b.x0, b.y0, b.x1, b.y1}; }

inline Box decode_box(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::AdapterError, "box must be [x0, y0, x1, y1]");
  for (const auto& v : j)
    if (!v.is_number()) throw Error(ErrorKind::AdapterError, "box coordinates must be numbers");
  return Box{static_cast<int>(std::lround(j[0].get<double>())), static_cast<int>(std::lround(j[1].get<double>())),
             static_cast<int>(std::lround(j[2].get<double>())), static_cast<int>(std::lround(j[3].get<double>()))};
}

inline json encode_frames(const FrameSequence& seq) {
  json arr = json::array();
  for (const auto& f : seq.frames) arr.push_back({{"index", f.index}, {"timestamp", f.timestamp}, {"image", encode_image(f.image)}});
  return arr;
}

inline FrameSequence decode_frames(const json& arr) {
  if (!arr.is_array()) throw Error(ErrorKind::AdapterError, "frames must be an array");
  FrameSequence seq;
  try {
    for (const auto& f : arr)
      seq.frames.push_back(Frame{f.at("index").get<int64_t>(), decode_image(f.at("image")), f.value("timestamp", 0.0)});
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed frame: ") + e.what());
  }
  return seq;
}

inline json encode_detection(const Detection& d) {
  return {{"class_name", d.class_name}, {"confidence", d.confidence}, {"bbox", encode_box(d.bbox)}};
}

inline Detection decode_detection(const json& j) {
  try {
    return Detection{j.at("class_name").get<std::string>(), j.at("confidence").get<double>(), decode_box(j.at("bbox"))};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed detection: ") + e.what());
  }
}

inline json encode_info(const AdapterInfo& info) {
  return {{"embedding_dim", info.embedding_dim}, {"latent_shape", info.latent_shape}, {"backend", info.backend}};
}

inline AdapterInfo decode_info(const json& j) {
  try {
    return AdapterInfo{j.at("embedding_dim").get<int>(), j.at("latent_shape").get<std::vector<uint64_t>>(),
                       j.value("backend", std::string{})};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed info: ") + e.what());
  }
}

inline json encode_track(const MaskTrack& t) {
  json masks = json::array(), boxes = json::array();
  for (const auto& m : t.masks) masks.push_back(encode_mask(m));
  for (const auto& b : t.boxes) boxes.push_back(b ? encode_box(*b) : json(nullptr));
  return {{"instance_id", t.instance_id}, {"masks", masks}, {"boxes", boxes}};
}

inline MaskTrack decode_track(const json& j) {
  try {
    MaskTrack t;
    t.instance_id = j.value("instance_id", std::string{});
    for (const auto& m : j.at("masks")) t.masks.push_back(decode_mask(m));
    for (const auto& b : j.at("boxes")) t.boxes.push_back(b.is_null() ? std::nullopt : std::optional<Box>(decode_box(b)));
    if (t.boxes.size() != t.masks.size()) throw Error(ErrorKind::AdapterError, "track has different mask and box counts");
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed track: ") + e.what());
  }
}

/// Numeric arrays carry their shape: `{"shape": [n], "data": [...]}`.
inline json encode_vector(const std::vector<float>& v) { return {{"shape", {v.size()}}, {"dtype", "float32"}, {"data", v}}; }

inline std::vector<float> decode_vector(const json& j) {
  try {
    auto shape = j.at("shape").get<std::vector<size_t>>();
    auto data = j.at("data").get<std::vector<float>>();
    if (shape.size() != 1 || shape[0] != data.size()) throw Error(ErrorKind::AdapterError, "vector shape does not match its data");
    return data;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed vector: ") + e.what());
  }
}

inline json encode_flow(const FlowField& f) {
  std::vector<double> data;
  data.reserve(f.vectors.size() * 2);
  for (const auto& v : f.vectors) {
    data.push_back(v.dx);
    data.push_back(v.dy);
  }
  return {{"grid", f.grid},
          {"width", f.width},
          {"height", f.height},
          {"vectors", {{"shape", {f.grid, f.grid, 2}}, {"dtype", "float64"}, {"data", data}}}};
}

inline FlowField decode_flow(const json& j) {
  try {
    FlowField f;
    f.grid = j.at("grid").get<int>();
    f.width = j.at("width").get<int>();
    f.height = j.at("height").get<int>();
    const auto& v = j.at("vectors");
    const auto shape = v.at("shape").get<std::vector<int>>();
    const auto data = v.at("data").get<std::vector<double>>();
    if (f.grid <= 0 || shape != std::vector<int>{f.grid, f.grid, 2} || data.size() != static_cast<size_t>(f.grid * f.grid * 2))
      throw Error(ErrorKind::AdapterError, "flow vectors do not match the declared grid");
    for (size_t i = 0; i < data.size(); i += 2) f.vectors.push_back({data[i], data[i + 1]});
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::AdapterError, std::string("malformed flow: ") + e.what());
  }
}

}  // namespace wire

/// Deterministic stand-in for the model service. Detections and per-frame
/// boxes are scripted; embeddings and latents are cheap synthetic functions
/// of the input.
class MockModelAdapter : public ModelAdapter {
 public:
  static constexpr int kEmbeddingDim = 64;
  static constexpr int kLatentGrid = 8;

  struct Script {
    std::vector<Detection> detections;
    /// Optional per-detection boxes keyed by source frame index. Frames
    /// without an entry reuse the seed box.
    std::vector<std::map<int64_t, Box>> tracks;
  };

  MockModelAdapter() = default;
  explicit MockModelAdapter(Script script) : script_(std::move(script)) {}

  /// `{"detections": [{"class_name", "confidence", "bbox"}], "tracks": [{"<frame>": [x0,y0,x1,y1]}]}`
  static Script script_from_json(const nlohmann::json& j) {
    Script s;
    if (j.contains("detections"))
      for (const auto& d : j.at("detections")) s.detections.push_back(wire::decode_detection(d));
    if (j.contains("tracks"))
      for (const auto& t : j.at("tracks")) {
        std::map<int64_t, Box> track;
        for (auto it = t.begin(); it != t.end(); ++it) track[std::stoll(it.key())] = wire::decode_box(it.value());
        s.tracks.push_back(std::move(track));
      }
    return s;
  }

  AdapterInfo info() override {
    return AdapterInfo{kEmbeddingDim, {1, 0, kLatentGrid, kLatentGrid, 3}, "stub"};
  }

  std::vector<Detection> detect(const Image& frame) override {
    count("detect");
    std::vector<Detection> out;
    for (const auto& d : script_.detections) {
      Box b = d.bbox;
      b.x0 = std::clamp(b.x0, 0, frame.width);
      b.x1 = std::clamp(b.x1, 0, frame.width);
      b.y0 = std::clamp(b.y0, 0, frame.height);
      b.y1 = std::clamp(b.y1, 0, frame.height);
      if (b.valid_in(frame.width, frame.height)) out.push_back({d.class_name, d.confidence, b});
    }
    return out;
  }

  std::vector<MaskTrack> segment(const FrameSequence& frames, const std::vector<Box>& seeds) override {
    count("segment");
    std::vector<MaskTrack> out;
    for (const auto& seed : seeds) {
      if (!seed.valid_in(frames.width(), frames.height())) throw Error(ErrorKind::AdapterError, "seed box outside frame 0");
      // Match the seed against the scripted detections to find its track.
      const std::map<int64_t, Box>* track = nullptr;
      for (size_t i = 0; i < script_.detections.size() && i < script_.tracks.size(); ++i)
        if (script_.detections[i].bbox == seed) track = &script_.tracks[i];
      MaskTrack mt;
      for (const auto& f : frames.frames) {
        Box b = seed;
        if (track)
          if (auto it = track->find(f.index); it != track->end()) b = it->second;
        auto m = Mask::from_box(f.image.width, f.image.height, b);
        mt.boxes.push_back(m.bounding_box());
        mt.masks.push_back(std::move(m));
      }
      out.push_back(std::move(mt));
    }
    return out;
  }

  /// Signed hashed bag of words, unit-normalised.
  std::vector<float> embed_text(const std::string& s) override {
    count("embed_text");
    if (text::trim(s).empty()) throw Error(ErrorKind::AdapterError, "empty text");
    std::vector<double> v(kEmbeddingDim, 0.0);
    for (const auto& tok : text::content_tokens(s)) {
      const auto h = text::fnv1a64(tok);
      v[h % kEmbeddingDim] += (h >> 63) ? -1.0 : 1.0;
    }
    v[0] += 1e-3;
    return normalize(v);
  }

  /// Coarse colour layout: mean RGB on a 4x4 grid plus a bias term.
  std::vector<float> embed_image(const Image& img) override {
    count("embed_image");
    if (img.empty()) throw Error(ErrorKind::AdapterError, "empty image");
    std::vector<double> v(kEmbeddingDim, 0.0);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const int cell = (y * 4 / img.height) * 4 + (x * 4 / img.width);
        for (int c = 0; c < 3; ++c) v[cell * 3 + c] += img.at(x, y)[c] / 255.0;
      }
    v[kEmbeddingDim - 1] = 1e-3 * img.width * img.height;
    return normalize(v);
  }

  /// Shape (1, T, 8, 8, 3): per-frame average pooling to an 8x8 grid.
  LatentTensor vae_latent(const FrameSequence& frames) override {
    count("vae_latent");
    if (frames.empty()) throw Error(ErrorKind::AdapterError, "no frames");
    const uint64_t t = frames.size();
    LatentTensor lt({1, t, kLatentGrid, kLatentGrid, 3});
    std::vector<double> counts(static_cast<size_t>(kLatentGrid) * kLatentGrid);
    for (uint64_t ti = 0; ti < t; ++ti) {
      const auto& img = frames.frames[ti].image;
      std::vector<double> acc(static_cast<size_t>(kLatentGrid) * kLatentGrid * 3, 0.0);
      std::fill(counts.begin(), counts.end(), 0.0);
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
          const size_t cell = static_cast<size_t>(y * kLatentGrid / img.height) * kLatentGrid + (x * kLatentGrid / img.width);
          counts[cell] += 1;
          for (int c = 0; c < 3; ++c) acc[cell * 3 + c] += img.at(x, y)[c] / 255.0;
        }
      for (size_t cell = 0; cell < counts.size(); ++cell)
        for (int c = 0; c < 3; ++c)
          lt.values[(ti * counts.size() + cell) * 3 + c] =
              static_cast<float>(counts[cell] > 0 ? acc[cell * 3 + c] / counts[cell] : 0.0);
    }
    return lt;
  }

  FlowField flow(const Image& a, const Image& b, int grid) override {
    count("flow");
    FlowOptions opt;
    opt.grid = grid;
    return estimate_global_flow(a, b, opt);
  }

  /// Number of calls per endpoint so far.
  std::map<std::string, int> calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  static std::vector<float> normalize(const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<float> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
    return out;
  }

  void count(const std::string& endpoint) {
    std::lock_guard lock(mu_);
    ++calls_[endpoint];
  }

  Script script_;
  mutable std::mutex mu_;
  std::map<std::string, int> calls_;
};

}  // namespace instcap
