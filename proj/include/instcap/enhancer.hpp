// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "instcap/caption_schema.hpp"
#include "instcap/chat.hpp"
#include "instcap/conversation.hpp"
#include "instcap/error.hpp"
#include "instcap/orchestrator.hpp"
#include "instcap/prompt_pack.hpp"
#include "instcap/text.hpp"

namespace instcap {

struct MentionEntry {
  std::string mention;      ///< exact span of the dense prompt
  std::string class_guess;
  bool operator==(const MentionEntry&) const = default;
};

enum class EnhancerStage { None, A, BI, BII };

inline std::string_view stage_id(EnhancerStage s) {
  switch (s) {
    case EnhancerStage::A: return "stage_a";
    case EnhancerStage::BI: return "stage_b1";
    case EnhancerStage::BII: return "stage_b2";
    case EnhancerStage::None: break;
  }
  return "none";
}

struct EnhancerJob {
  std::string short_prompt;
  std::optional<std::string> dense_prompt;
  std::optional<std::vector<MentionEntry>> instance_list;
  std::optional<StructuredCaption> final;
  std::vector<std::pair<std::string, std::string>> stage_log;  ///< (stage id, transcript hash)
  std::set<std::string> flags;                                 ///< content_drop, ungrounded_mention
  std::vector<std::string> missing_content_words;
  std::vector<std::string> dropped_mentions;

  EnhancerStage completed() const {
    if (final) return EnhancerStage::BII;
    if (instance_list) return EnhancerStage::BI;
    if (dense_prompt) return EnhancerStage::A;
    return EnhancerStage::None;
  }
};

inline nlohmann::ordered_json to_json(const EnhancerJob& job) {
  nlohmann::ordered_json j;
  j["short_prompt"] = job.short_prompt;
  j["dense_prompt"] = job.dense_prompt ? nlohmann::ordered_json(*job.dense_prompt) : nlohmann::ordered_json(nullptr);
  if (job.instance_list) {
    j["instance_list"] = nlohmann::ordered_json::array();
    for (const auto& e : *job.instance_list) j["instance_list"].push_back({e.mention, e.class_guess});
  } else {
    j["instance_list"] = nullptr;
  }
  j["final"] = job.final ? to_json(*job.final) : nlohmann::ordered_json(nullptr);
  j["stage_log"] = nlohmann::ordered_json::array();
  for (const auto& [stage, hash] : job.stage_log) j["stage_log"].push_back({stage, hash});
  j["flags"] = job.flags;
  j["missing_content_words"] = job.missing_content_words;
  j["dropped_mentions"] = job.dropped_mentions;
  return j;
}

/// One word per line; '#' lines are comments.
inline std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read stop-word list " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto w = text::to_lower(text::trim(line));
    if (!w.empty() && w[0] != '#') out.insert(w);
  }
  return out;
}

/// Content words of `short_prompt` (stop-words excluded) absent from `dense`.
inline std::vector<std::string> missing_content_words(const std::string& short_prompt, const std::string& dense,
                                                      const std::set<std::string>& stopwords) {
  auto dense_tokens = text::content_tokens(dense);
  std::set<std::string> have(dense_tokens.begin(), dense_tokens.end());
  std::vector<std::string> missing;
  for (const auto& w : text::content_tokens(short_prompt)) {
    if (stopwords.count(w) || have.count(w)) continue;
    if (std::find(missing.begin(), missing.end(), w) == missing.end()) missing.push_back(w);
  }
  return missing;
}

/// Parses "mention — class" lines. "NONE" alone means an empty list.
/// Returns nullopt when any non-blank line is not an entry.
inline std::optional<std::vector<MentionEntry>> parse_mention_list(const std::string& reply) {
  static const std::regex marker(R"(^\s*(?:[-*•]|\d+[.)])\s+)");
  std::vector<MentionEntry> out;
  std::vector<std::string> lines;
  for (const auto& l : text::split_lines(reply))
    if (!text::trim(l).empty()) lines.push_back(text::trim(l));
  if (lines.empty()) return std::nullopt;
  if (lines.size() == 1 && text::to_lower(lines[0]) == "none") return out;
  for (auto line : lines) {
    line = std::regex_replace(line, marker, "", std::regex_constants::format_first_only);
    size_t pos = std::string::npos, len = 0;
    for (const char* sep : {" \xE2\x80\x94 ", " \xE2\x80\x93 ", " -> ", " - "}) {
      pos = line.rfind(sep);
      if (pos != std::string::npos) {
        len = std::string_view(sep).size();
        break;
      }
    }
    if (pos == std::string::npos) return std::nullopt;
    auto unquote = [](std::string s) {
      s = text::trim(s);
      if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
      return text::trim(s);
    };
    MentionEntry e{unquote(line.substr(0, pos)), unquote(line.substr(pos + len))};
    if (e.mention.empty() || e.class_guess.empty()) return std::nullopt;
    out.push_back(std::move(e));
  }
  return out;
}

/// Parses `TAG: value` lines for the given tags (case-insensitive).
/// Continuation lines join the open tag. Missing tags are absent from the map.
inline std::map<std::string, std::string> parse_tagged_lines(const std::string& reply, const std::vector<std::string>& tags) {
  std::map<std::string, std::string> out;
  std::string open;
  for (const auto& raw : text::split_lines(reply)) {
    auto line = text::trim(raw);
    if (line.empty()) continue;
    bool matched = false;
    const auto colon = line.find(':');
    if (colon != std::string::npos) {
      auto tag = text::trim(line.substr(0, colon));
      for (const auto& t : tags) {
        if (text::to_lower(tag) == text::to_lower(t)) {
          open = t;
          out[t] = text::trim(line.substr(colon + 1));
          matched = true;
          break;
        }
      }
    }
    if (!matched && !open.empty()) out[open] += (out[open].empty() ? "" : " ") + line;
  }
  return out;
}

struct EnhancerOptions {
  int retry_budget = 1;
  std::set<std::string> stopwords;
  std::vector<std::string> examples;
};

/// Loads the enhancer prompt pack and its few-shot examples from `dir`
/// (templates directly inside, examples under `examples/`).
struct EnhancerPack {
  PromptPack prompts;
  std::vector<std::string> examples;

  static EnhancerPack load(const std::filesystem::path& dir) {
    EnhancerPack p{PromptPack::load(dir), {}};
    p.prompts.require({"system", "stage_a", "stage_b1", "list_retry", "stage_b2_scene", "stage_b2_instance", "fields_retry"});
    if (std::filesystem::is_directory(dir / "examples")) {
      const auto examples = PromptPack::load(dir / "examples");
      for (const auto& [name, body] : examples.templates()) p.examples.push_back(body);
    }
    return p;
  }
};

/// Two-stage expansion of a short prompt into a structured caption.
class Enhancer {
 public:
  Enhancer(ChatBackend& backend, BackendConfig cfg, const PromptPack& prompts, EnhancerOptions opt = {},
           ConversationLog* log = nullptr)
      : backend_(backend), cfg_(std::move(cfg)), prompts_(prompts), opt_(std::move(opt)), log_(log) {
    prompts_.require({"system", "stage_a", "stage_b1", "list_retry", "stage_b2_scene", "stage_b2_instance", "fields_retry"});
  }

  void stage_a_expand(EnhancerJob& job) {
    if (text::trim(job.short_prompt).empty()) throw Error(ErrorKind::PreconditionError, "short prompt is empty");
    if (job.completed() != EnhancerStage::None) throw Error(ErrorKind::ContractError, "stage A already ran on this job");
    auto b = bundle("enhance_stage_a", "");
    b.turns.push_back({ChatRole::User, prompts_.render("stage_a", {{"short_prompt", job.short_prompt}, {"examples", examples()}}), {}});
    auto ex = run_conversation(backend_, cfg_, std::move(b), 0, accept_any(), log_);
    job.dense_prompt = text::trim(ex.reply);
    job.missing_content_words = missing_content_words(job.short_prompt, *job.dense_prompt, opt_.stopwords);
    if (!job.missing_content_words.empty()) job.flags.insert("content_drop");
    job.stage_log.emplace_back(stage_id(EnhancerStage::A), ex.transcript_hash());
  }

  void stage_b_segment(EnhancerJob& job) {
    if (job.completed() != EnhancerStage::A) throw Error(ErrorKind::ContractError, "stage B(I) requires stage A and runs once");
    auto b = bundle("enhance_stage_b1", "");
    b.turns.push_back({ChatRole::User,
                       prompts_.render("stage_b1", {{"short_prompt", job.short_prompt},
                                                    {"dense_prompt", *job.dense_prompt},
                                                    {"examples", examples()}}),
                       {}});
    auto ex = run_conversation(backend_, cfg_, std::move(b), 1, [&](const std::string& reply) -> std::optional<std::string> {
      if (parse_mention_list(reply)) return std::nullopt;
      return prompts_.get("list_retry");
    }, log_);
    auto list = parse_mention_list(ex.reply);
    if (!list) throw Error(ErrorKind::ParseError, "instance list reply is not a list");
    std::vector<MentionEntry> grounded;
    for (auto& e : *list) {
      const auto pos = text::find_ci(*job.dense_prompt, e.mention);
      if (pos == std::string::npos) {
        job.flags.insert("ungrounded_mention");
        job.dropped_mentions.push_back(e.mention);
        continue;
      }
      e.mention = job.dense_prompt->substr(pos, e.mention.size());
      grounded.push_back(std::move(e));
    }
    job.instance_list = std::move(grounded);
    job.stage_log.emplace_back(stage_id(EnhancerStage::BI), ex.transcript_hash());
  }

  void stage_b_enhance(EnhancerJob& job) {
    if (job.completed() != EnhancerStage::BI) throw Error(ErrorKind::ContractError, "stage B(II) requires stage B(I) and runs once");
    std::string transcripts;
    std::string labels;
    for (auto m : kAllCameraMotions)
      if (m != CameraMotion::Unknown) labels += (labels.empty() ? "" : ", ") + std::string(to_string(m));
    std::string instances;
    for (const auto& e : *job.instance_list) instances += (instances.empty() ? "" : "; ") + e.mention + " (" + e.class_guess + ")";
    if (instances.empty()) instances = "none";

    const std::vector<std::string> scene_tags{"GLOBAL", "BACKGROUND", "CAMERA", "CAMERA_DETAIL"};
    auto scene_problem = [&](const std::string& reply) -> std::optional<std::string> {
      auto f = parse_tagged_lines(reply, scene_tags);
      for (const auto& t : {"GLOBAL", "BACKGROUND", "CAMERA"})
        if (!f.count(t) || f[t].empty()) return std::string("missing ") + t;
      const auto n = text::word_count(f["GLOBAL"]);
      if (n > kGlobalSummaryWordLimit) return "GLOBAL has " + std::to_string(n) + " words, the limit is 20";
      if (!parse_camera_reply(f["CAMERA"])) return "CAMERA must be one of " + labels;
      return std::nullopt;
    };
    auto sb = bundle("enhance_stage_b2", "scene");
    sb.turns.push_back({ChatRole::User,
                        prompts_.render("stage_b2_scene", {{"short_prompt", job.short_prompt},
                                                           {"dense_prompt", *job.dense_prompt},
                                                           {"instances", instances},
                                                           {"labels", labels}}),
                        {}});
    auto scene = run_conversation(backend_, cfg_, std::move(sb), opt_.retry_budget, [&](const std::string& r) -> std::optional<std::string> {
      if (auto p = scene_problem(r)) return prompts_.render("fields_retry", {{"problem", *p}});
      return std::nullopt;
    }, log_);
    transcripts += scene.transcript;
    if (auto p = scene_problem(scene.reply)) throw Error(ErrorKind::SchemaViolation, "scene fields: " + *p);
    auto f = parse_tagged_lines(scene.reply, scene_tags);
    auto cam = parse_camera_reply(f["CAMERA"]);
    std::string camera_detail = f.count("CAMERA_DETAIL") ? f["CAMERA_DETAIL"] : "";
    if (camera_detail.empty()) camera_detail = cam->second;

    StructuredCaption c;
    c.global_summary = f["GLOBAL"];
    c.background = f["BACKGROUND"];
    c.camera = CameraAnnotation{cam->first, camera_detail, std::nullopt};
    for (size_t i = 0; i < job.instance_list->size(); ++i) {
      const auto& e = (*job.instance_list)[i];
      auto ib = bundle("enhance_stage_b2", "i" + std::to_string(i));
      ib.turns.push_back({ChatRole::User,
                          prompts_.render("stage_b2_instance", {{"short_prompt", job.short_prompt},
                                                                {"dense_prompt", *job.dense_prompt},
                                                                {"global_summary", c.global_summary},
                                                                {"mention", e.mention},
                                                                {"class_name", e.class_guess}}),
                          {}});
      auto ex = run_conversation(backend_, cfg_, std::move(ib), opt_.retry_budget, [&](const std::string& r) -> std::optional<std::string> {
        if (parse_instance_fields(r)) return std::nullopt;
        return prompts_.render("fields_retry", {{"problem", "APPEARANCE, ACTIONS_MOTION and POSITION lines are required"}});
      }, log_);
      transcripts += ex.transcript;
      auto fields = parse_instance_fields(ex.reply);
      if (!fields) throw Error(ErrorKind::SchemaViolation, "instance \"" + e.mention + "\" reply lacks the tagged fields");
      c.instances.push_back({"i" + std::to_string(i), e.class_guess, fields->appearance, fields->actions_motion,
                             fields->position, std::nullopt});
    }
    try {
      validate(c);
    } catch (const Error& err) {
      throw Error(ErrorKind::SchemaViolation, err.detail());
    }
    job.final = std::move(c);
    job.stage_log.emplace_back(stage_id(EnhancerStage::BII), text::hex64(text::fnv1a64(transcripts)));
  }

  /// Runs all stages. Errors carry the failing stage id.
  std::pair<std::string, EnhancerJob> enhance(const std::string& short_prompt,
                                              RenderStyle style = RenderStyle::FlatTrainingText) {
    EnhancerJob job;
    job.short_prompt = short_prompt;
    run_stage(EnhancerStage::A, [&] { stage_a_expand(job); });
    run_stage(EnhancerStage::BI, [&] { stage_b_segment(job); });
    run_stage(EnhancerStage::BII, [&] { stage_b_enhance(job); });
    return {render_caption(*job.final, style), std::move(job)};
  }

 private:
  template <class F>
  static void run_stage(EnhancerStage s, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      throw e.tagged(std::string(stage_id(s)));
    }
  }

  std::string examples() const {
    std::string out;
    for (const auto& e : opt_.examples) out += (out.empty() ? "" : "\n\n") + e;
    return out.empty() ? "(none)" : out;
  }

  PromptBundle bundle(std::string operation, std::string subject) const {
    PromptBundle b;
    b.operation = std::move(operation);
    b.subject = std::move(subject);
    b.expected_format = ReplyFormat::StructuredFields;
    b.retry_budget = opt_.retry_budget;
    b.turns.push_back({ChatRole::System, prompts_.get("system"), {}});
    return b;
  }

  ChatBackend& backend_;
  BackendConfig cfg_;
  const PromptPack& prompts_;
  EnhancerOptions opt_;
  ConversationLog* log_;
};

}  // namespace instcap
