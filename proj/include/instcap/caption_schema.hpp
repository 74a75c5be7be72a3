// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "instcap/camera_label.hpp"
#include "instcap/error.hpp"
#include "instcap/image.hpp"
#include "instcap/temporal_metadata.hpp"
#include "instcap/text.hpp"

namespace instcap {

inline constexpr size_t kGlobalSummaryWordLimit = 20;

struct TrackedBox {
  int64_t frame_index = 0;
  Box box;
  bool operator==(const TrackedBox&) const = default;
};

struct CameraAnnotation {
  CameraMotion basic_movement = CameraMotion::Unknown;
  std::string qualitative;                ///< intensity / speed phrasing
  std::optional<std::string> shot_notes;  ///< angle, tone
  bool operator==(const CameraAnnotation&) const = default;
};

struct InstanceDescription {
  std::string id;
  std::string class_name;
  std::string appearance;
  std::string actions_motion;
  std::string position;  ///< may be empty when the instance fills the frame
  std::optional<std::vector<TrackedBox>> bbox_track;
  bool operator==(const InstanceDescription&) const = default;
};

/// Instance-aware structured caption: one-sentence summary, background,
/// camera and an ordered list of per-instance records.
struct StructuredCaption {
  std::string global_summary;
  std::string background;
  CameraAnnotation camera;
  std::vector<InstanceDescription> instances;
  std::optional<TemporalMetadata> source_meta;
  bool operator==(const StructuredCaption&) const = default;
};

enum class RenderStyle { Structured, FlatTrainingText };

/// Throws SchemaViolation / WordLimitViolation when an invariant is broken.
inline void validate(const StructuredCaption& c) {
  if (text::word_count(c.global_summary) > kGlobalSummaryWordLimit)
    throw Error(ErrorKind::WordLimitViolation,
                "global_summary has " + std::to_string(text::word_count(c.global_summary)) +
                    " words (limit 20)");
  std::set<std::string> ids;
  for (const auto& inst : c.instances) {
    if (inst.id.empty()) throw Error(ErrorKind::SchemaViolation, "instance with empty id");
    if (!ids.insert(inst.id).second)
      throw Error(ErrorKind::SchemaViolation, "duplicate instance id \"" + inst.id + "\"");
    if (text::trim(inst.class_name).empty())
      throw Error(ErrorKind::SchemaViolation, "instance " + inst.id + " has empty class_name");
    if (text::trim(inst.appearance).empty())
      throw Error(ErrorKind::SchemaViolation, "instance " + inst.id + " has empty appearance");
    if (text::trim(inst.actions_motion).empty())
      throw Error(ErrorKind::SchemaViolation, "instance " + inst.id + " has empty actions_motion");
    if (inst.bbox_track)
      for (const auto& tb : *inst.bbox_track)
        if (tb.frame_index < 0 || tb.box.x0 < 0 || tb.box.y0 < 0 || tb.box.x1 <= tb.box.x0 ||
            tb.box.y1 <= tb.box.y0)
          throw Error(ErrorKind::SchemaViolation, "instance " + inst.id + " has an invalid bbox_track entry");
  }
  if (c.source_meta) {
    const auto& ts = c.source_meta->timestamps;
    for (size_t i = 1; i < ts.size(); ++i)
      if (!(ts[i] > ts[i - 1]))
        throw Error(ErrorKind::SchemaViolation, "source_meta.timestamps not strictly increasing");
  }
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline const ojson& require(const ojson& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(ErrorKind::SchemaViolation, "missing required field " + where + key);
  return *it;
}

inline std::string require_string(const ojson& obj, const char* key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw Error(ErrorKind::SchemaViolation, "field " + where + key + " must be a string");
  return v.get<std::string>();
}

inline void reject_unknown(const ojson& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw Error(ErrorKind::SchemaViolation, "unknown field " + where + it.key());
  }
}

inline TemporalMetadata meta_from_json(const ojson& j) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaViolation, "source_meta must be an object or null");
  reject_unknown(j, {"duration", "frame_count", "fps", "timestamps"}, "source_meta.");
  TemporalMetadata m;
  try {
    m.duration = require(j, "duration", "source_meta.").get<double>();
    m.frame_count = require(j, "frame_count", "source_meta.").get<int64_t>();
    m.fps = require(j, "fps", "source_meta.").get<double>();
    m.timestamps = require(j, "timestamps", "source_meta.").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("source_meta: ") + e.what());
  }
  return m;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const StructuredCaption& c) {
  nlohmann::ordered_json j;
  j["global_summary"] = c.global_summary;
  j["background"] = c.background;
  j["camera"]["basic_movement"] = std::string(to_string(c.camera.basic_movement));
  j["camera"]["qualitative"] = c.camera.qualitative;
  j["camera"]["shot_notes"] = c.camera.shot_notes ? nlohmann::ordered_json(*c.camera.shot_notes) : nlohmann::ordered_json(nullptr);
  j["instances"] = nlohmann::ordered_json::array();
  for (const auto& inst : c.instances) {
    nlohmann::ordered_json ij;
    ij["id"] = inst.id;
    ij["class_name"] = inst.class_name;
    ij["appearance"] = inst.appearance;
    ij["actions_motion"] = inst.actions_motion;
    ij["position"] = inst.position;
    if (inst.bbox_track) {
      ij["bbox_track"] = nlohmann::ordered_json::array();
      for (const auto& tb : *inst.bbox_track)
        ij["bbox_track"].push_back({tb.frame_index, tb.box.x0, tb.box.y0, tb.box.x1, tb.box.y1});
    } else {
      ij["bbox_track"] = nullptr;
    }
    j["instances"].push_back(std::move(ij));
  }
  j["source_meta"] = c.source_meta ? to_json(*c.source_meta) : nlohmann::ordered_json(nullptr);
  return j;
}

/// Parses and validates a caption JSON document.
inline StructuredCaption parse_caption(const nlohmann::ordered_json& doc) {
  using detail::require;
  using detail::require_string;
  if (!doc.is_object()) throw Error(ErrorKind::SchemaViolation, "caption document must be a JSON object");
  detail::reject_unknown(doc, {"global_summary", "background", "camera", "instances", "source_meta"}, "");

  StructuredCaption c;
  c.global_summary = require_string(doc, "global_summary", "");
  c.background = require_string(doc, "background", "");

  const auto& cam = require(doc, "camera", "");
  if (!cam.is_object()) throw Error(ErrorKind::SchemaViolation, "camera must be an object");
  detail::reject_unknown(cam, {"basic_movement", "qualitative", "shot_notes"}, "camera.");
  const auto label = require_string(cam, "basic_movement", "camera.");
  auto motion = camera_motion_from_string(label);
  if (!motion) throw Error(ErrorKind::SchemaViolation, "camera.basic_movement \"" + label + "\" is not a known label");
  c.camera.basic_movement = *motion;
  c.camera.qualitative = require_string(cam, "qualitative", "camera.");
  if (auto it = cam.find("shot_notes"); it != cam.end() && !it->is_null()) {
    if (!it->is_string()) throw Error(ErrorKind::SchemaViolation, "camera.shot_notes must be a string or null");
    c.camera.shot_notes = it->get<std::string>();
  }

  const auto& insts = require(doc, "instances", "");
  if (!insts.is_array()) throw Error(ErrorKind::SchemaViolation, "instances must be an array");
  for (size_t i = 0; i < insts.size(); ++i) {
    const auto& ij = insts[i];
    const std::string where = "instances[" + std::to_string(i) + "].";
    if (!ij.is_object()) throw Error(ErrorKind::SchemaViolation, where + " must be an object");
    detail::reject_unknown(ij, {"id", "class_name", "appearance", "actions_motion", "position", "bbox_track"}, where);
    InstanceDescription d;
    d.id = require_string(ij, "id", where);
    d.class_name = require_string(ij, "class_name", where);
    d.appearance = require_string(ij, "appearance", where);
    d.actions_motion = require_string(ij, "actions_motion", where);
    d.position = require_string(ij, "position", where);
    if (auto it = ij.find("bbox_track"); it != ij.end() && !it->is_null()) {
      if (!it->is_array()) throw Error(ErrorKind::SchemaViolation, where + "bbox_track must be an array or null");
      std::vector<TrackedBox> track;
      for (const auto& e : *it) {
        if (!e.is_array() || e.size() != 5)
          throw Error(ErrorKind::SchemaViolation, where + "bbox_track entries are [frame, x0, y0, x1, y1]");
        for (const auto& v : e)
          if (!v.is_number_integer())
            throw Error(ErrorKind::SchemaViolation, where + "bbox_track entries must be integers");
        track.push_back({e[0].get<int64_t>(), Box{e[1].get<int>(), e[2].get<int>(), e[3].get<int>(), e[4].get<int>()}});
      }
      d.bbox_track = std::move(track);
    }
    c.instances.push_back(std::move(d));
  }
  if (auto it = doc.find("source_meta"); it != doc.end() && !it->is_null())
    c.source_meta = detail::meta_from_json(*it);

  validate(c);
  return c;
}

inline StructuredCaption parse_caption_text(std::string_view doc) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(doc);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::SchemaViolation, std::string("caption is not valid JSON: ") + e.what());
  }
  return parse_caption(j);
}

inline StructuredCaption load_caption(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::SchemaViolation, "cannot read caption " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_caption_text(ss.str());
}

namespace detail {
inline void append_sentence(std::string& out, std::string_view part) {
  auto t = text::trim(part);
  if (t.empty()) return;
  if (!out.empty()) out.push_back(' ');
  out += t;
}
}  // namespace detail

/// `Structured` emits the canonical JSON document (2-space indent, trailing
/// newline). `FlatTrainingText` concatenates global summary, camera,
/// background, then instances in list order.
inline std::string render_caption(const StructuredCaption& c, RenderStyle style) {
  if (style == RenderStyle::Structured) return to_json(c).dump(2) + "\n";

  std::string out;
  detail::append_sentence(out, c.global_summary);

  std::string camera = "Camera: " + text::replace_all(std::string(to_string(c.camera.basic_movement)), "_", " ");
  if (!text::trim(c.camera.qualitative).empty()) camera += ", " + text::trim(c.camera.qualitative);
  camera += ".";
  if (c.camera.shot_notes && !text::trim(*c.camera.shot_notes).empty()) camera += " " + text::trim(*c.camera.shot_notes);
  detail::append_sentence(out, camera);

  detail::append_sentence(out, "Background: " + text::trim(c.background));
  for (const auto& inst : c.instances) {
    detail::append_sentence(out, inst.class_name + ":");
    detail::append_sentence(out, inst.appearance);
    detail::append_sentence(out, inst.actions_motion);
    detail::append_sentence(out, inst.position);
  }
  return out;
}

/// Per-class guidance injected into instance prompts.
class ClassHintRegistry {
 public:
  static constexpr const char* kDefaultHint =
      "Please describe this object's color, size, condition, motion, and any distinctive features in detail.";

  ClassHintRegistry() = default;
  explicit ClassHintRegistry(std::map<std::string, std::string> hints) {
    for (auto& [k, v] : hints) add(k, v);
  }

  static ClassHintRegistry load(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot read class hint pack " + json_path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, "class hint pack is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "class hint pack must be a JSON object");
    ClassHintRegistry r;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_string()) throw Error(ErrorKind::ConfigError, "hint for " + it.key() + " is not a string");
      r.add(it.key(), it.value().get<std::string>());
    }
    return r;
  }

  void add(const std::string& class_name, const std::string& hint) {
    if (text::trim(hint).empty()) return;
    hints_[normalize(class_name)] = hint;
  }

  bool contains(const std::string& class_name) const { return hints_.count(normalize(class_name)) > 0; }
  size_t size() const { return hints_.size(); }

  const std::string& lookup(const std::string& class_name) const {
    static const std::string kDefault = kDefaultHint;
    auto it = hints_.find(normalize(class_name));
    return it == hints_.end() ? kDefault : it->second;
  }

 private:
  static std::string normalize(const std::string& s) {
    return text::to_lower(text::replace_all(text::trim(s), "_", " "));
  }

  std::map<std::string, std::string> hints_;
};

inline const std::string& lookup_hint(const ClassHintRegistry& r, const std::string& class_name) {
  return r.lookup(class_name);
}

/// Positive / negative word lists guiding caption wording.
struct Lexicon {
  std::vector<std::string> positive;
  std::vector<std::string> negative;

  static std::vector<std::string> read_list(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot read lexicon file " + p.string());
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
      auto w = text::to_lower(text::trim(line));
      if (w.empty() || w[0] == '#') continue;
      if (seen.insert(w).second) out.push_back(w);
    }
    return out;
  }

  /// Loads `positive.txt` and `negative.txt` from `dir`; throws
  /// SchemaViolation if the lists overlap.
  static Lexicon load(const std::filesystem::path& dir) {
    Lexicon lex{read_list(dir / "positive.txt"), read_list(dir / "negative.txt")};
    lex.check_disjoint();
    return lex;
  }

  void check_disjoint() const {
    std::set<std::string> pos(positive.begin(), positive.end());
    for (const auto& w : negative)
      if (pos.count(w)) throw Error(ErrorKind::SchemaViolation, "lexicon entry \"" + w + "\" is both positive and negative");
  }

  /// Text block injected into instance prompts.
  std::string guidance() const {
    if (positive.empty() && negative.empty()) return {};
    std::string out;
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
      return s;
    };
    if (!positive.empty()) out += "Where accurate, prefer vivid wording such as: " + join(positive) + ".";
    if (!negative.empty()) out += std::string(out.empty() ? "" : " ") + "Avoid vague or low-quality wording such as: " + join(negative) + ".";
    return out;
  }
};

}  // namespace instcap
