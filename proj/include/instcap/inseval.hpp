// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "instcap/chat.hpp"
#include "instcap/conversation.hpp"
#include "instcap/error.hpp"
#include "instcap/text.hpp"

namespace instcap {

enum class InsevalDimension {
  SingleAction,
  SingleColor,
  SingleShape,
  SingleTexture,
  SingleDetail,
  MultipleAction,
  MultipleColor,
  MultipleTexture,
  MultipleShape,
  MultipleDetail,
};

/// Scored by default, in report order.
inline constexpr std::array<InsevalDimension, 8> kScoredDimensions = {
    InsevalDimension::SingleAction,   InsevalDimension::SingleColor,   InsevalDimension::SingleShape,
    InsevalDimension::SingleTexture,  InsevalDimension::SingleDetail,  InsevalDimension::MultipleAction,
    InsevalDimension::MultipleColor,  InsevalDimension::MultipleTexture};

/// Shipped in the pack but only scored with `include_extended`.
inline constexpr std::array<InsevalDimension, 2> kExtendedDimensions = {InsevalDimension::MultipleShape,
                                                                         InsevalDimension::MultipleDetail};

inline std::string_view to_string(InsevalDimension d) {
  switch (d) {
    case InsevalDimension::SingleAction: return "Single-Action";
    case InsevalDimension::SingleColor: return "Single-Color";
    case InsevalDimension::SingleShape: return "Single-Shape";
    case InsevalDimension::SingleTexture: return "Single-Texture";
    case InsevalDimension::SingleDetail: return "Single-Detail";
    case InsevalDimension::MultipleAction: return "Multiple-Action";
    case InsevalDimension::MultipleColor: return "Multiple-Color";
    case InsevalDimension::MultipleTexture: return "Multiple-Texture";
    case InsevalDimension::MultipleShape: return "Multiple-Shape";
    case InsevalDimension::MultipleDetail: return "Multiple-Detail";
  }
  return "?";
}

inline InsevalDimension inseval_dimension_from_string(std::string_view s) {
  for (auto d : kScoredDimensions)
    if (to_string(d) == s) return d;
  for (auto d : kExtendedDimensions)
    if (to_string(d) == s) return d;
  throw Error(ErrorKind::ConfigError, "unknown Inseval dimension \"" + std::string(s) + "\"");
}

inline bool is_multiple(InsevalDimension d) { return to_string(d).rfind("Multiple", 0) == 0; }

struct InsevalTarget {
  std::string entity;
  std::string attribute;
};

struct InsevalPrompt {
  std::string id;
  InsevalDimension dimension = InsevalDimension::SingleAction;
  std::string prompt;
  std::vector<InsevalTarget> targets;
  std::string answer_key;

  void validate() const {
    if (id.empty()) throw Error(ErrorKind::ConfigError, "Inseval prompt without id");
    if (is_multiple(dimension) ? targets.size() < 2 : targets.size() != 1)
      throw Error(ErrorKind::ConfigError, "Inseval prompt " + id + " has " + std::to_string(targets.size()) + " targets for " +
                                              std::string(to_string(dimension)));
  }
};

/// Judge conversation templates. `{{entity}}`, `{{attribute}}`,
/// `{{prompt}}` and `{{answer_key}}` are substituted per question.
struct JudgeTemplates {
  std::string system;
  std::string question;
  std::string detail_question;  ///< used for *-Detail dimensions when set
  std::string retry;
};

class InsevalRegistry {
 public:
  void add(InsevalPrompt p) {
    p.validate();
    if (index_.count(p.id)) throw Error(ErrorKind::ConfigError, "duplicate Inseval prompt id " + p.id);
    index_[p.id] = prompts_.size();
    prompts_.push_back(std::move(p));
  }

  const InsevalPrompt& find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(ErrorKind::UnknownPrompt, "unknown Inseval prompt id \"" + id + "\"");
    return prompts_[it->second];
  }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  const std::vector<InsevalPrompt>& prompts() const { return prompts_; }
  size_t count(InsevalDimension d) const {
    return static_cast<size_t>(std::count_if(prompts_.begin(), prompts_.end(), [&](const auto& p) { return p.dimension == d; }));
  }

  JudgeTemplates judge;

  static InsevalRegistry from_json(const nlohmann::json& j) {
    InsevalRegistry r;
    try {
      const auto& jt = j.at("judge");
      r.judge.system = jt.at("system").get<std::string>();
      r.judge.question = jt.at("question").get<std::string>();
      r.judge.detail_question = jt.value("detail_question", std::string{});
      r.judge.retry = jt.at("retry").get<std::string>();
      for (const auto& p : j.at("prompts")) {
        InsevalPrompt ip;
        ip.id = p.at("id").get<std::string>();
        ip.dimension = inseval_dimension_from_string(p.at("dimension").get<std::string>());
        ip.prompt = p.at("prompt").get<std::string>();
        for (const auto& t : p.at("targets")) ip.targets.push_back({t.at("entity").get<std::string>(), t.at("attribute").get<std::string>()});
        ip.answer_key = p.value("answer", std::string{});
        r.add(std::move(ip));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError, std::string("malformed Inseval pack: ") + e.what());
    }
    return r;
  }

  static InsevalRegistry load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot read Inseval pack " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::ConfigError, std::string("Inseval pack is not valid JSON: ") + e.what());
    }
  }

 private:
  std::vector<InsevalPrompt> prompts_;
  std::map<std::string, size_t> index_;
};

struct JudgeVerdict {
  std::string prompt_id;
  std::vector<bool> per_target;
  bool overall = false;
  std::string transcript_ref;
  int64_t seed = 0;

  bool operator==(const JudgeVerdict&) const = default;
};

inline nlohmann::ordered_json to_json(const JudgeVerdict& v) {
  nlohmann::ordered_json j;
  j["prompt_id"] = v.prompt_id;
  j["per_target"] = v.per_target;
  j["overall"] = v.overall;
  j["transcript_ref"] = v.transcript_ref;
  j["seed"] = v.seed;
  return j;
}

/// Reads "ANSWER: yes|no" (last occurrence) or a bare yes/no reply.
inline std::optional<bool> parse_judge_answer(const std::string& reply) {
  static const std::regex tagged(R"(answer\s*[:=]\s*\**\s*(yes|no)\b)", std::regex::icase);
  std::optional<bool> out;
  for (auto it = std::sregex_iterator(reply.begin(), reply.end(), tagged); it != std::sregex_iterator(); ++it)
    out = text::to_lower((*it)[1].str()) == "yes";
  if (out) return out;
  auto bare = text::to_lower(text::trim(reply));
  while (!bare.empty() && (bare.back() == '.' || bare.back() == '!')) bare.pop_back();
  if (bare == "yes") return true;
  if (bare == "no") return false;
  return std::nullopt;
}

/// Asks one yes/no question per target about the video frames. The
/// prompt passes only if every target passes.
inline JudgeVerdict inseval_judge(const std::vector<std::string>& video_frames, const InsevalPrompt& p,
                                  const JudgeTemplates& tpl, ChatBackend& backend, BackendConfig cfg, int64_t seed,
                                  ConversationLog* log = nullptr) {
  p.validate();
  cfg.seed = seed;
  const bool detail = p.dimension == InsevalDimension::SingleDetail || p.dimension == InsevalDimension::MultipleDetail;
  const auto& question = detail && !tpl.detail_question.empty() ? tpl.detail_question : tpl.question;
  JudgeVerdict v;
  v.prompt_id = p.id;
  v.seed = seed;
  std::string transcripts;
  for (size_t i = 0; i < p.targets.size(); ++i) {
    const auto& t = p.targets[i];
    PromptBundle b;
    b.operation = "inseval_judge";
    b.subject = p.id + "#" + std::to_string(i);
    b.expected_format = ReplyFormat::FreeText;
    b.retry_budget = 1;
    b.turns.push_back({ChatRole::System, tpl.system, {}});
    b.turns.push_back({ChatRole::User,
                       text::trim(text::render_template(question, {{"entity", t.entity},
                                                                   {"attribute", t.attribute},
                                                                   {"prompt", p.prompt},
                                                                   {"answer_key", p.answer_key}})),
                       video_frames});
    auto ex = run_conversation(backend, cfg, std::move(b), 1, [&](const std::string& r) -> std::optional<std::string> {
      if (parse_judge_answer(r)) return std::nullopt;
      return tpl.retry;
    }, log);
    transcripts += ex.transcript;
    auto ans = parse_judge_answer(ex.reply);
    if (!ans) throw Error(ErrorKind::ParseError, "judge reply for " + p.id + " target " + std::to_string(i) + " has no yes/no answer");
    v.per_target.push_back(*ans);
  }
  v.overall = !v.per_target.empty() && std::all_of(v.per_target.begin(), v.per_target.end(), [](bool b) { return b; });
  v.transcript_ref = text::hex64(text::fnv1a64(transcripts));
  return v;
}

struct DimensionScore {
  InsevalDimension dimension;
  size_t passed = 0;
  size_t total = 0;
  std::optional<int> rate_percent;  ///< nullopt when the dimension has no prompts
};

struct InsevalReport {
  std::vector<DimensionScore> dimensions;
  std::optional<int64_t> average_hundredths;  ///< average percent x 100

  std::optional<double> average() const {
    if (!average_hundredths) return std::nullopt;
    return static_cast<double>(*average_hundredths) / 100.0;
  }

  std::string average_text() const {
    if (!average_hundredths) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", static_cast<long long>(*average_hundredths / 100),
                  static_cast<long long>(*average_hundredths % 100));
    return buf;
  }
};

/// Whole percent, halves rounded up.
inline int rate_percent(size_t passed, size_t total) {
  if (total == 0) throw Error(ErrorKind::EmptyInput, "rate of an empty dimension");
  return static_cast<int>((200 * passed + total) / (2 * total));
}

/// Mean of whole-percent rates, in hundredths of a percent, halves rounded up.
inline int64_t average_rate_hundredths(const std::vector<int>& rates) {
  if (rates.empty()) throw Error(ErrorKind::EmptyInput, "average of no rates");
  int64_t sum = 0;
  for (int r : rates) sum += r;
  const auto k = static_cast<int64_t>(rates.size());
  return (2 * 100 * sum + k) / (2 * k);
}

/// Per-dimension pass rates and their average. Prompts without a verdict
/// count as failed; dimensions without prompts are reported empty and left
/// out of the average.
inline InsevalReport inseval_score(const std::vector<JudgeVerdict>& verdicts, const InsevalRegistry& registry,
                                   bool include_extended = false) {
  std::set<std::string> passed;
  for (const auto& v : verdicts) {
    registry.find(v.prompt_id);
    if (v.overall) passed.insert(v.prompt_id);
  }
  std::vector<InsevalDimension> dims(kScoredDimensions.begin(), kScoredDimensions.end());
  if (include_extended) dims.insert(dims.end(), kExtendedDimensions.begin(), kExtendedDimensions.end());
  InsevalReport rep;
  std::vector<int> rates;
  for (auto d : dims) {
    DimensionScore s{d, 0, 0, std::nullopt};
    for (const auto& p : registry.prompts()) {
      if (p.dimension != d) continue;
      ++s.total;
      if (passed.count(p.id)) ++s.passed;
    }
    if (s.total > 0) {
      s.rate_percent = rate_percent(s.passed, s.total);
      rates.push_back(*s.rate_percent);
    }
    rep.dimensions.push_back(s);
  }
  if (!rates.empty()) rep.average_hundredths = average_rate_hundredths(rates);
  return rep;
}

inline nlohmann::ordered_json to_json(const InsevalReport& r) {
  nlohmann::ordered_json j;
  j["dimensions"] = nlohmann::ordered_json::array();
  for (const auto& d : r.dimensions) {
    nlohmann::ordered_json dj;
    dj["dimension"] = std::string(to_string(d.dimension));
    dj["passed"] = d.passed;
    dj["total"] = d.total;
    dj["rate_percent"] = d.rate_percent ? nlohmann::ordered_json(*d.rate_percent) : nlohmann::ordered_json(nullptr);
    j["dimensions"].push_back(dj);
  }
  j["average_percent"] = r.average_hundredths ? nlohmann::ordered_json(r.average_text()) : nlohmann::ordered_json(nullptr);
  return j;
}

inline std::string format_table(const InsevalReport& r) {
  std::string out;
  char buf[128];
  for (const auto& d : r.dimensions) {
    if (d.rate_percent)
      std::snprintf(buf, sizeof buf, "%-18s %3d%%  (%zu/%zu)\n", std::string(to_string(d.dimension)).c_str(), *d.rate_percent, d.passed, d.total);
    else
      std::snprintf(buf, sizeof buf, "%-18s  n/a  (no prompts)\n", std::string(to_string(d.dimension)).c_str());
    out += buf;
  }
  out += "Average            " + r.average_text() + "%\n";
  return out;
}

}  // namespace instcap
