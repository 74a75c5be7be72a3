// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "instcap/concurrency.hpp"
#include "instcap/error.hpp"
#include "instcap/text.hpp"

namespace instcap {

enum class ChatRole { System, User, Assistant };

inline std::string_view to_string(ChatRole r) {
  switch (r) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "user";
}

inline ChatRole chat_role_from_string(std::string_view s) {
  if (s == "system") return ChatRole::System;
  if (s == "user") return ChatRole::User;
  if (s == "assistant") return ChatRole::Assistant;
  throw Error(ErrorKind::BackendError, "unknown chat role \"" + std::string(s) + "\"");
}

struct ChatTurn {
  ChatRole role = ChatRole::User;
  std::string text;
  std::vector<std::string> images;  ///< image references, relative to the bundle's image root
  bool operator==(const ChatTurn&) const = default;
};

enum class ReplyFormat { FreeText, OneSentence, StructuredFields };

inline std::string_view to_string(ReplyFormat f) {
  switch (f) {
    case ReplyFormat::FreeText: return "free-text";
    case ReplyFormat::OneSentence: return "one-sentence";
    case ReplyFormat::StructuredFields: return "structured-fields";
  }
  return "free-text";
}

/// A complete conversation ready to send. `operation`/`subject` identify
/// the call for logging and for scripted mocks; `attempt` counts prior tries
/// of the same conversation.
struct PromptBundle {
  std::string operation;
  std::string subject;
  std::vector<ChatTurn> turns;
  ReplyFormat expected_format = ReplyFormat::FreeText;
  int retry_budget = 0;
  int attempt = 0;
  std::filesystem::path image_root;  ///< not serialised; resolves relative image references

  void validate() const {
    if (turns.empty() || turns.front().role != ChatRole::System)
      throw Error(ErrorKind::ContractError, "prompt bundle must start with a system turn");
    for (size_t i = 0; i < turns.size(); ++i) {
      if (i > 0 && turns[i].role == ChatRole::System)
        throw Error(ErrorKind::ContractError, "prompt bundle has more than one system turn");
      if (turns[i].role == ChatRole::System && !turns[i].images.empty())
        throw Error(ErrorKind::ContractError, "system turns carry no images");
    }
    if (retry_budget < 0) throw Error(ErrorKind::ContractError, "retry budget must be >= 0");
  }

  std::vector<std::string> all_images() const {
    std::vector<std::string> out;
    for (const auto& t : turns) out.insert(out.end(), t.images.begin(), t.images.end());
    return out;
  }

  std::string last_user_text() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it)
      if (it->role == ChatRole::User) return it->text;
    return {};
  }
};

struct BackendConfig {
  std::string endpoint;
  std::string model = "default";
  double temperature = 0.0;
  std::optional<int64_t> seed = 0;
  int max_tokens = 1024;
};

/// Wire request body for the chat endpoint.
inline nlohmann::json chat_request_json(const PromptBundle& b, const BackendConfig& cfg, bool absolute_images) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : b.turns) {
    nlohmann::json imgs = nlohmann::json::array();
    for (const auto& ref : t.images)
      imgs.push_back(absolute_images && !b.image_root.empty() ? (b.image_root / ref).string() : ref);
    turns.push_back({{"role", std::string(to_string(t.role))}, {"text", t.text}, {"images", imgs}});
  }
  nlohmann::json j = {{"model", cfg.model},
                      {"turns", turns},
                      {"temperature", cfg.temperature},
                      {"max_tokens", cfg.max_tokens},
                      {"operation", b.operation}};
  j["seed"] = cfg.seed ? nlohmann::json(*cfg.seed) : nlohmann::json(nullptr);
  if (!b.subject.empty()) j["subject"] = b.subject;
  if (b.attempt > 0) j["attempt"] = b.attempt;
  return j;
}

/// Inverse of chat_request_json (images stay as sent).
inline PromptBundle bundle_from_request(const nlohmann::json& j) {
  PromptBundle b;
  try {
    for (const auto& t : j.at("turns")) {
      ChatTurn turn{chat_role_from_string(t.at("role").get<std::string>()), t.at("text").get<std::string>(), {}};
      if (t.contains("images"))
        for (const auto& ref : t.at("images")) turn.images.push_back(ref.get<std::string>());
      b.turns.push_back(std::move(turn));
    }
    b.operation = j.value("operation", std::string{});
    b.subject = j.value("subject", std::string{});
    b.attempt = j.value("attempt", 0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BackendError, std::string("malformed chat request: ") + e.what());
  }
  return b;
}

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Returns the assistant reply; throws BackendError on transport failure.
  virtual std::string complete(const PromptBundle& bundle, const BackendConfig& cfg) = 0;
};

/// Scripted backend. Replies are looked up by `operation#subject`, then
/// `operation`, indexed by the bundle's attempt number; attempts past the
/// end of a list reuse its last entry. A reply starting with "!error"
/// simulates a transport failure. Every bundle is recorded for audits.
class MockChatBackend : public ChatBackend {
 public:
  using Script = std::map<std::string, std::vector<std::string>>;
  using Responder = std::function<std::string(const PromptBundle&)>;

  MockChatBackend() = default;
  explicit MockChatBackend(Script script) : script_(std::move(script)) {}
  explicit MockChatBackend(Responder responder) : responder_(std::move(responder)) {}

  static Responder echo_responder() {
    return [](const PromptBundle& b) { return b.last_user_text(); };
  }
  static MockChatBackend echo() { return MockChatBackend(echo_responder()); }

  static Script script_from_json(const nlohmann::json& j) {
    Script s;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.value().is_string())
        s[it.key()] = {it.value().get<std::string>()};
      else
        s[it.key()] = it.value().get<std::vector<std::string>>();
    }
    return s;
  }

  void set(const std::string& key, std::vector<std::string> replies) {
    std::lock_guard lock(mu_);
    script_[key] = std::move(replies);
  }

  std::string complete(const PromptBundle& bundle, const BackendConfig&) override {
    bundle.validate();
    std::string reply;
    {
      std::lock_guard lock(mu_);
      ledger_.push_back(bundle);
      ++calls_[bundle.operation];
    }
    if (responder_) {
      reply = responder_(bundle);
    } else {
      std::lock_guard lock(mu_);
      const std::vector<std::string>* list = nullptr;
      if (auto it = script_.find(bundle.operation + "#" + bundle.subject); !bundle.subject.empty() && it != script_.end())
        list = &it->second;
      else if (auto it2 = script_.find(bundle.operation); it2 != script_.end())
        list = &it2->second;
      if (!list || list->empty())
        throw Error(ErrorKind::BackendError, "mock has no scripted reply for " + bundle.operation);
      reply = (*list)[std::min<size_t>(bundle.attempt, list->size() - 1)];
    }
    if (reply.rfind("!error", 0) == 0) throw Error(ErrorKind::BackendError, "scripted transport failure: " + reply);
    return reply;
  }

  std::vector<PromptBundle> ledger() const {
    std::lock_guard lock(mu_);
    return ledger_;
  }

  int calls(const std::string& operation) const {
    std::lock_guard lock(mu_);
    auto it = calls_.find(operation);
    return it == calls_.end() ? 0 : it->second;
  }

  int total_calls() const {
    std::lock_guard lock(mu_);
    return static_cast<int>(ledger_.size());
  }

 private:
  Script script_;
  Responder responder_;
  mutable std::mutex mu_;
  std::vector<PromptBundle> ledger_;
  std::map<std::string, int> calls_;
};

/// Bounds concurrent requests and their rate toward a wrapped backend.
class ThrottledBackend : public ChatBackend {
 public:
  ThrottledBackend(ChatBackend& inner, size_t max_in_flight, double requests_per_second, double burst = 4)
      : inner_(inner), gate_(max_in_flight), bucket_(requests_per_second, burst) {}

  std::string complete(const PromptBundle& bundle, const BackendConfig& cfg) override {
    bucket_.acquire();
    gate_.acquire();
    struct Release {
      InFlightLimit& g;
      ~Release() { g.release(); }
    } release{gate_};
    return inner_.complete(bundle, cfg);
  }

  size_t peak_in_flight() const { return gate_.peak(); }

 private:
  ChatBackend& inner_;
  InFlightLimit gate_;
  TokenBucket bucket_;
};

/// Thread-safe record of every exchange, written as JSON lines.
class ConversationLog {
 public:
  void record(const PromptBundle& b, const std::string& reply, const std::string& error = {}) {
    nlohmann::ordered_json j;
    j["operation"] = b.operation;
    j["subject"] = b.subject;
    j["attempt"] = b.attempt;
    j["expected_format"] = std::string(to_string(b.expected_format));
    j["turns"] = nlohmann::ordered_json::array();
    for (const auto& t : b.turns)
      j["turns"].push_back({{"role", std::string(to_string(t.role))}, {"text", t.text}, {"images", t.images}});
    if (error.empty())
      j["reply"] = reply;
    else
      j["error"] = error;
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(j));
  }

  /// Appends another log's entries in their recorded order.
  void append(const ConversationLog& other) {
    auto more = other.entries();
    std::lock_guard lock(mu_);
    entries_.insert(entries_.end(), more.begin(), more.end());
  }

  std::vector<nlohmann::ordered_json> entries() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

  std::string jsonl() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& e : entries_) out += e.dump() + "\n";
    return out;
  }

  /// Stable digest of the exchanges recorded so far.
  std::string hash() const { return text::hex64(text::fnv1a64(jsonl())); }

 private:
  mutable std::mutex mu_;
  std::vector<nlohmann::ordered_json> entries_;
};

}  // namespace instcap
