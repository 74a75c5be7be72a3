// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include "instcap/amc.hpp"
#include "instcap/caption_schema.hpp"
#include "instcap/chat.hpp"
#include "instcap/conversation.hpp"
#include "instcap/error.hpp"
#include "instcap/prompt_pack.hpp"
#include "instcap/text.hpp"
#include "instcap/video_ingest.hpp"

namespace instcap {

struct OrchestratorOptions {
  int retry_budget = 2;
  bool use_camera_hint = true;
  bool use_class_hints = true;
  bool use_lexicon = true;
  std::filesystem::path image_root;  ///< where frame directories live, for HTTP backends
};

struct GlobalSummary {
  std::string text;
  bool word_limit_truncated = false;
  int calls = 0;
};

/// Tagged sections of a structured-fields reply.
struct InstanceFields {
  std::string appearance;
  std::string actions_motion;
  std::string position;
};

/// Finds `APPEARANCE:`, `ACTIONS_MOTION:` and `POSITION:` sections. Tags are
/// case-insensitive and may be decorated with list markers or bold markers;
/// continuation lines join the open section. Appearance and actions must be
/// non-empty, position must be present but may be empty.
inline std::optional<InstanceFields> parse_instance_fields(const std::string& reply) {
  static const std::regex tag_re(R"(^\s*(?:[-*]\s*)?(?:\*\*)?\s*(APPEARANCE|ACTIONS?[ _]?(?:AND[ _])?MOTION|POSITION)\s*(?:\*\*)?\s*:\s*(?:\*\*)?\s*(.*)$)",
                                 std::regex::icase);
  std::optional<std::string> fields[3];
  int open = -1;
  for (const auto& line : text::split_lines(reply)) {
    std::smatch m;
    if (std::regex_match(line, m, tag_re)) {
      const auto tag = text::to_lower(m[1].str());
      open = tag.rfind("appearance", 0) == 0 ? 0 : tag.rfind("position", 0) == 0 ? 2 : 1;
      if (fields[open]) return std::nullopt;  // repeated tag
      fields[open] = text::trim(m[2].str());
    } else if (open >= 0 && !text::trim(line).empty()) {
      auto& f = *fields[open];
      f += (f.empty() ? "" : " ") + text::trim(line);
    }
  }
  if (!fields[0] || !fields[1] || !fields[2]) return std::nullopt;
  if (fields[0]->empty() || fields[1]->empty()) return std::nullopt;
  return InstanceFields{*fields[0], *fields[1], *fields[2]};
}

/// Finds the first camera label named in a reply ("zoom_in" or "zoom in").
/// Returns the label and the reply with the label and surrounding
/// separators removed.
inline std::optional<std::pair<CameraMotion, std::string>> parse_camera_reply(const std::string& reply) {
  const auto lower = text::to_lower(reply);
  size_t best_pos = std::string::npos, best_len = 0;
  CameraMotion best{};
  for (auto m : kAllCameraMotions) {
    if (m == CameraMotion::Unknown) continue;
    const std::string underscored(to_string(m));
    for (const auto& form : {underscored, text::replace_all(underscored, "_", " ")}) {
      for (size_t pos = lower.find(form); pos != std::string::npos; pos = lower.find(form, pos + 1)) {
        const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
        const size_t end = pos + form.size();
        const bool right_ok = end == lower.size() || !std::isalnum(static_cast<unsigned char>(lower[end]));
        if (left_ok && right_ok && pos < best_pos) {
          best_pos = pos;
          best_len = form.size();
          best = m;
        }
      }
    }
  }
  if (best_pos == std::string::npos) return std::nullopt;
  auto is_sep = [](char c) { return text::is_space(c) || c == ',' || c == ';' || c == ':' || c == '-' || c == '.'; };
  std::string left = reply.substr(0, best_pos), right = reply.substr(best_pos + best_len);
  while (!left.empty() && is_sep(left.back())) left.pop_back();
  size_t b = 0;
  while (b < left.size() && is_sep(left[b])) ++b;
  left.erase(0, b);
  b = 0;
  while (b < right.size() && is_sep(right[b])) ++b;
  right.erase(0, b);
  while (!right.empty() && is_sep(right.back())) right.pop_back();
  return std::make_pair(best, left.empty() || right.empty() ? left + right : left + ", " + right);
}

inline std::string image_ref(const FrameSequence& seq, const Frame& f) {
  char name[32];
  std::snprintf(name, sizeof name, "%06lld.png", static_cast<long long>(f.index));
  return seq.source_id + "/" + name;
}

inline std::vector<std::string> image_refs(const FrameSequence& seq) {
  std::vector<std::string> out;
  for (const auto& f : seq.frames) out.push_back(image_ref(seq, f));
  return out;
}

inline std::string describe_temporal_metadata(const TemporalMetadata& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "The video lasts %.2f seconds (%lld frames at %.2f fps).", m.duration,
                static_cast<long long>(m.frame_count), m.fps);
  std::string out = buf;
  if (!m.timestamps.empty()) {
    out += " The provided frames are sampled at";
    for (size_t i = 0; i < m.timestamps.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s %.2fs", i ? "," : "", m.timestamps[i]);
      out += buf;
    }
    out += ".";
  }
  return out;
}

/// Runs the captioning conversations against one chat backend.
class Orchestrator {
 public:
  Orchestrator(ChatBackend& backend, BackendConfig cfg, const PromptPack& prompts, OrchestratorOptions opt = {},
               ConversationLog* log = nullptr)
      : backend_(backend), cfg_(std::move(cfg)), prompts_(prompts), opt_(std::move(opt)), log_(log) {
    prompts_.require({"system_part1", "system_part2", "system_part3", "global", "global_retry", "background",
                      "camera_hint", "camera_open", "camera_retry", "instance", "format_retry"});
  }

  const OrchestratorOptions& options() const { return opt_; }

  GlobalSummary describe_global(const FrameSequence& frames, const std::optional<TemporalMetadata>& meta = {}) {
    require_frames(frames);
    auto b = start_bundle("describe_global", "", ReplyFormat::OneSentence);
    b.turns.push_back({ChatRole::User,
                       prompts_.render("global", {{"temporal_metadata", meta ? describe_temporal_metadata(*meta) : ""}}),
                       image_refs(frames)});
    auto ex = converse(std::move(b), opt_.retry_budget, [&](const std::string& reply) -> std::optional<std::string> {
      const auto n = text::word_count(reply);
      if (n >= 1 && n <= kGlobalSummaryWordLimit) return std::nullopt;
      return prompts_.render("global_retry", {{"word_count", std::to_string(n)}});
    });
    GlobalSummary out{text::trim(ex.reply), false, ex.calls};
    if (!ex.accepted) {
      out.text = text::truncate_words(out.text, kGlobalSummaryWordLimit);
      out.word_limit_truncated = true;
    }
    return out;
  }

  std::string describe_background(const FrameSequence& frames, const std::string& global_summary) {
    require_frames(frames);
    auto b = start_bundle("describe_background", "", ReplyFormat::FreeText);
    b.turns.push_back({ChatRole::User, prompts_.render("background", {{"global_summary", global_summary}}), image_refs(frames)});
    return converse(std::move(b), 0, accept_any()).reply;
  }

  /// The hint decides the basic movement unless it is `unknown` (or hints
  /// are disabled), in which case the backend's label is parsed.
  CameraAnnotation annotate_camera(const FrameSequence& frames, CameraMotion hint) {
    require_frames(frames);
    if (!opt_.use_camera_hint) hint = CameraMotion::Unknown;
    if (hint != CameraMotion::Unknown) {
      auto b = start_bundle("annotate_camera", std::string(to_string(hint)), ReplyFormat::FreeText);
      const auto label = text::replace_all(std::string(to_string(hint)), "_", " ");
      b.turns.push_back({ChatRole::User, prompts_.render("camera_hint", {{"camera_label", label}}), image_refs(frames)});
      auto ex = converse(std::move(b), 0, accept_any());
      // A reply restating the hinted label keeps only its remainder.
      auto restated = parse_camera_reply(ex.reply);
      if (restated && restated->first == hint) return CameraAnnotation{hint, restated->second, std::nullopt};
      return CameraAnnotation{hint, text::trim(ex.reply), std::nullopt};
    }
    std::string labels;
    for (auto m : kAllCameraMotions)
      if (m != CameraMotion::Unknown) labels += (labels.empty() ? "" : ", ") + std::string(to_string(m));
    auto b = start_bundle("annotate_camera", "unknown", ReplyFormat::FreeText);
    b.turns.push_back({ChatRole::User, prompts_.render("camera_open", {{"labels", labels}}), image_refs(frames)});
    auto ex = converse(std::move(b), 1, [&](const std::string& reply) -> std::optional<std::string> {
      if (parse_camera_reply(reply)) return std::nullopt;
      return prompts_.render("camera_retry", {{"labels", labels}});
    });
    auto parsed = parse_camera_reply(ex.reply);
    if (!parsed) throw Error(ErrorKind::ParseError, "camera reply names no known movement: \"" + ex.reply + "\"");
    return CameraAnnotation{parsed->first, parsed->second, std::nullopt};
  }

  /// The conversation for one instance. Only the isolated clip is attached.
  PromptBundle instance_bundle(const InstanceAssets& asset, const std::string& global_summary, const ClassHintRegistry& hints,
                               const Lexicon& lex) const {
    auto b = start_bundle("describe_instance", asset.instance_id, ReplyFormat::StructuredFields);
    b.turns.push_back({ChatRole::User,
                       prompts_.render("instance", {{"global_summary", global_summary},
                                                    {"class_name", asset.class_name},
                                                    {"class_hint", opt_.use_class_hints ? hints.lookup(asset.class_name) : ""},
                                                    {"lexicon", opt_.use_lexicon ? lex.guidance() : ""}}),
                       image_refs(asset.blurred_clip)});
    return b;
  }

  InstanceDescription describe_instance(const InstanceAssets& asset, const std::string& global_summary,
                                        const ClassHintRegistry& hints, const Lexicon& lex) {
    if (asset.blurred_clip.empty()) throw Error(ErrorKind::PreconditionError, "instance clip is empty");
    auto ex = converse(instance_bundle(asset, global_summary, hints, lex), 1,
                       [&](const std::string& reply) -> std::optional<std::string> {
                         if (parse_instance_fields(reply)) return std::nullopt;
                         return prompts_.get("format_retry");
                       });
    auto fields = parse_instance_fields(ex.reply);
    if (!fields) throw Error(ErrorKind::ParseError, "instance " + asset.instance_id + " reply lacks the tagged fields");
    InstanceDescription d;
    d.id = asset.instance_id;
    d.class_name = asset.class_name;
    d.appearance = fields->appearance;
    d.actions_motion = fields->actions_motion;
    d.position = fields->position;
    std::vector<TrackedBox> track;
    for (size_t i = 0; i < asset.track.boxes.size() && i < asset.blurred_clip.size(); ++i)
      if (asset.track.boxes[i]) track.push_back({asset.blurred_clip.frames[i].index, *asset.track.boxes[i]});
    if (!track.empty()) d.bbox_track = std::move(track);
    return d;
  }

  struct RankedInstance {
    InstanceDescription description;
    double confidence = 0.0;
  };

  /// Orders instances by descending detector confidence and validates.
  static StructuredCaption assemble_caption(const std::string& global_summary, const std::string& background,
                                            const CameraAnnotation& camera, std::vector<RankedInstance> instances,
                                            std::optional<TemporalMetadata> meta) {
    std::stable_sort(instances.begin(), instances.end(),
                     [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
    StructuredCaption c;
    c.global_summary = global_summary;
    c.background = background;
    c.camera = camera;
    for (auto& r : instances) c.instances.push_back(std::move(r.description));
    c.source_meta = std::move(meta);
    try {
      validate(c);
    } catch (const Error& e) {
      throw Error(ErrorKind::SchemaViolation, e.detail());
    }
    return c;
  }

 private:
  void require_frames(const FrameSequence& frames) const {
    if (frames.empty()) throw Error(ErrorKind::NoFrames, "conversation needs at least one frame");
  }

  std::string system_prompt() const {
    return prompts_.get("system_part1") + "\n\n" + prompts_.get("system_part2") + "\n\n" + prompts_.get("system_part3");
  }

  PromptBundle start_bundle(std::string operation, std::string subject, ReplyFormat fmt) const {
    PromptBundle b;
    b.operation = std::move(operation);
    b.subject = std::move(subject);
    b.expected_format = fmt;
    b.retry_budget = opt_.retry_budget;
    b.image_root = opt_.image_root;
    b.turns.push_back({ChatRole::System, system_prompt(), {}});
    return b;
  }

  Exchange converse(PromptBundle b, int max_reasks, const ReplyCheck& check) {
    return run_conversation(backend_, cfg_, std::move(b), max_reasks, check, log_);
  }

  ChatBackend& backend_;
  BackendConfig cfg_;
  const PromptPack& prompts_;
  OrchestratorOptions opt_;
  ConversationLog* log_;
};

}  // namespace instcap
