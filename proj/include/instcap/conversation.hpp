// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "instcap/chat.hpp"
#include "instcap/error.hpp"
#include "instcap/text.hpp"

namespace instcap {

struct Exchange {
  std::string reply;
  bool accepted = false;
  int calls = 0;
  std::string transcript;  ///< request bodies and replies, in order

  std::string transcript_hash() const { return text::hex64(text::fnv1a64(transcript)); }
};

/// Returns nullopt to accept a reply, or the corrective user text to re-ask with.
using ReplyCheck = std::function<std::optional<std::string>(const std::string&)>;

/// Sends `b`, retrying transport failures and re-asking with the corrective
/// text from `check` at most `max_reasks` times, within 1 + b.retry_budget
/// calls in total. Throws BackendError when no reply was ever received.
inline Exchange run_conversation(ChatBackend& backend, const BackendConfig& cfg, PromptBundle b, int max_reasks,
                                 const ReplyCheck& check, ConversationLog* log = nullptr) {
  b.validate();
  Exchange ex;
  int reasks = 0;
  bool got_reply = false;
  std::string last_error;
  while (ex.calls <= b.retry_budget) {
    b.attempt = ex.calls;
    ex.transcript += chat_request_json(b, cfg, false).dump() + "\n";
    std::string reply;
    try {
      ++ex.calls;
      reply = backend.complete(b, cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::BackendError) throw;
      if (log) log->record(b, "", e.detail());
      ex.transcript += "!error " + e.detail() + "\n";
      last_error = e.detail();
      continue;
    }
    if (log) log->record(b, reply);
    ex.transcript += reply + "\n";
    ex.reply = reply;
    got_reply = true;
    auto corrective = check(reply);
    if (!corrective) {
      ex.accepted = true;
      return ex;
    }
    if (reasks >= max_reasks || ex.calls > b.retry_budget) return ex;
    ++reasks;
    b.turns.push_back({ChatRole::Assistant, reply, {}});
    b.turns.push_back({ChatRole::User, *corrective, {}});
  }
  if (!got_reply)
    throw Error(ErrorKind::BackendError,
                b.operation + " failed after " + std::to_string(ex.calls) + " calls: " + last_error);
  return ex;
}

inline ReplyCheck accept_any() {
  return [](const std::string&) { return std::optional<std::string>{}; };
}

}  // namespace instcap
