// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "instcap/amc.hpp"
#include "instcap/caption_schema.hpp"
#include "instcap/chat.hpp"
#include "instcap/concurrency.hpp"
#include "instcap/dataset.hpp"
#include "instcap/error.hpp"
#include "instcap/http_client.hpp"
#include "instcap/orchestrator.hpp"
#include "instcap/prompt_pack.hpp"
#include "instcap/run_config.hpp"
#include "instcap/video_ingest.hpp"

namespace instcap {

/// Everything a caption run talks to. Owns whatever it builds from a RunConfig.
struct PipelineContext {
  RunConfig cfg;
  PromptPack prompts;
  ClassHintRegistry hints;
  Lexicon lexicon;
  FrameProvider* provider = nullptr;
  ModelAdapter* adapter = nullptr;
  ChatBackend* chat = nullptr;

  std::unique_ptr<FrameProvider> owned_provider;
  std::unique_ptr<ModelAdapter> owned_adapter;
  std::unique_ptr<ChatBackend> owned_chat;
  std::unique_ptr<ChatBackend> throttle;

  /// Loads packs and builds the provider, adapter and chat backend named
  /// by `cfg`. HTTP endpoints are used when set, otherwise the mocks.
  static std::unique_ptr<PipelineContext> build(const RunConfig& cfg) {
    cfg.validate();
    auto ctx = std::make_unique<PipelineContext>();
    ctx->cfg = cfg;
    ctx->load_packs();
    if (cfg.provider == "external")
      ctx->owned_provider = std::make_unique<ExternalDecoderProvider>(cfg.decoder_probe, cfg.decoder_extract,
                                                                     std::filesystem::temp_directory_path());
    else
      ctx->owned_provider = std::make_unique<ImageDirectoryProvider>(cfg.default_fps);
    HttpOptions http{cfg.api_token};
    if (!cfg.adapter_url.empty()) {
      ctx->owned_adapter = std::make_unique<HttpModelAdapter>(cfg.adapter_url, http);
    } else {
      MockModelAdapter::Script script;
      if (!cfg.adapter_script.empty()) script = MockModelAdapter::script_from_json(read_json(cfg.adapter_script));
      ctx->owned_adapter = std::make_unique<MockModelAdapter>(std::move(script));
    }
    if (!cfg.chat_url.empty()) {
      ctx->owned_chat = std::make_unique<HttpChatBackend>(cfg.chat_url, http);
    } else if (!cfg.chat_script.empty()) {
      ctx->owned_chat = std::make_unique<MockChatBackend>(MockChatBackend::script_from_json(read_json(cfg.chat_script)));
    } else {
      ctx->owned_chat = std::make_unique<MockChatBackend>(MockChatBackend::echo_responder());
    }
    ctx->provider = ctx->owned_provider.get();
    ctx->adapter = ctx->owned_adapter.get();
    ctx->chat = ctx->owned_chat.get();
    if (cfg.requests_per_second > 0) {
      ctx->throttle = std::make_unique<ThrottledBackend>(*ctx->chat, cfg.max_in_flight, cfg.requests_per_second,
                                                         static_cast<double>(cfg.max_in_flight));
      ctx->chat = ctx->throttle.get();
    }
    return ctx;
  }

  /// Uses caller-owned services (tests, embedding).
  static std::unique_ptr<PipelineContext> with(const RunConfig& cfg, FrameProvider& provider, ModelAdapter& adapter,
                                               ChatBackend& chat) {
    cfg.validate();
    auto ctx = std::make_unique<PipelineContext>();
    ctx->cfg = cfg;
    ctx->load_packs();
    ctx->provider = &provider;
    ctx->adapter = &adapter;
    ctx->chat = &chat;
    return ctx;
  }

  static nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot read " + p.string());
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::ConfigError, p.string() + " is not valid JSON: " + e.what());
    }
  }

 private:
  void load_packs() {
    prompts = PromptPack::load(cfg.prompts_dir);
    hints = ClassHintRegistry::load(cfg.class_hints);
    lexicon = Lexicon::load(cfg.lexicon_dir);
  }
};

struct CaptionOutcome {
  StructuredCaption caption;
  AmcResult amc;
  std::vector<std::string> flags;
  std::string transcript_hash;
};

namespace detail {

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.stage().empty() ? e.tagged(name) : e;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::BackendError, e.what(), name);
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + p.string());
}

}  // namespace detail

/// Samples, isolates instances, runs the conversations and writes the
/// caption with its artifacts under `out_dir`:
///   frames/, instance_<id>/, amc_result.json, transcripts.jsonl, run.json,
///   and caption.json last.
inline CaptionOutcome caption_video(const std::string& video, const std::filesystem::path& out_dir, PipelineContext& ctx) {
  const auto& cfg = ctx.cfg;
  auto meta = detail::stage("ingest", [&] { return extract_metadata(*ctx.provider, video, cfg.sample_frames); });
  auto frames = detail::stage("ingest", [&] { return sample_frames(*ctx.provider, video, cfg.sample_frames); });
  frames.source_id = "frames";

  CaptionOutcome outcome;
  outcome.amc = detail::stage("amc", [&] { return run_amc(frames, *ctx.adapter, cfg.amc); });
  const auto abs_out = std::filesystem::absolute(out_dir);
  detail::stage("write", [&] {
    std::filesystem::create_directories(abs_out);
    write_frames(abs_out / frames.source_id, frames);
    write_amc_artifacts(abs_out, outcome.amc, cfg.amc);
    return 0;
  });

  OrchestratorOptions oo;
  oo.retry_budget = cfg.retry_budget;
  oo.use_camera_hint = cfg.use_camera_hint;
  oo.use_class_hints = cfg.use_class_hints;
  oo.use_lexicon = cfg.use_lexicon;
  oo.image_root = abs_out;
  BackendConfig bc = cfg.backend;
  bc.seed = cfg.seed;

  ConversationLog log;
  Orchestrator orch(*ctx.chat, bc, ctx.prompts, oo, &log);
  auto global = detail::stage("global", [&] { return orch.describe_global(frames, meta); });
  if (global.word_limit_truncated) outcome.flags.push_back("word_limit_truncated");
  auto background = detail::stage("background", [&] { return orch.describe_background(frames, global.text); });
  auto camera = detail::stage("camera", [&] { return orch.annotate_camera(frames, outcome.amc.camera.motion); });

  const auto& assets = outcome.amc.assets;
  std::vector<ConversationLog> instance_logs(assets.size());
  std::vector<Orchestrator::RankedInstance> ranked(assets.size());
  detail::stage("instance", [&] {
    parallel_for(assets.size(), std::max<size_t>(1, cfg.max_in_flight), [&](size_t i) {
      Orchestrator o(*ctx.chat, bc, ctx.prompts, oo, &instance_logs[i]);
      ranked[i] = {o.describe_instance(assets[i], global.text, ctx.hints, ctx.lexicon), assets[i].confidence};
    });
    return 0;
  });
  for (const auto& l : instance_logs) log.append(l);

  outcome.caption = detail::stage("assemble", [&] {
    return Orchestrator::assemble_caption(global.text, background, camera, ranked, meta);
  });
  outcome.transcript_hash = log.hash();

  detail::stage("write", [&] {
    detail::write_text(abs_out / "transcripts.jsonl", log.jsonl());
    nlohmann::ordered_json run;
    run["video"] = std::filesystem::path(video).filename().string();
    run["config"] = cfg.to_json();
    run["prompt_pack_hash"] = ctx.prompts.hash();
    run["transcript_hash"] = outcome.transcript_hash;
    run["flags"] = outcome.flags;
    detail::write_text(abs_out / "run.json", run.dump(2) + "\n");
    detail::write_text(abs_out / "caption.json", render_caption(outcome.caption, RenderStyle::Structured));
    return 0;
  });
  return outcome;
}

struct BatchRecordResult {
  std::string id;
  std::string status;  ///< ok | failed | skipped
  std::string reason;
};

struct BatchReport {
  std::vector<BatchRecordResult> records;
  size_t ok = 0, failed = 0, skipped = 0;
  std::string started_at, finished_at;
};

inline nlohmann::ordered_json to_json(const BatchReport& r) {
  nlohmann::ordered_json j;
  j["ok"] = r.ok;
  j["failed"] = r.failed;
  j["skipped"] = r.skipped;
  j["started_at"] = r.started_at;
  j["finished_at"] = r.finished_at;
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& x : r.records) {
    nlohmann::ordered_json e{{"id", x.id}, {"status", x.status}};
    if (!x.reason.empty()) e["reason"] = x.reason;
    j["records"].push_back(e);
  }
  return j;
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// True when `dir/caption.json` exists and validates.
inline bool has_valid_caption(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::exists(dir / "caption.json", ec)) return false;
  try {
    validate(load_caption(dir / "caption.json"));
    return true;
  } catch (const Error&) {
    return false;
  }
}

/// Captions every record into `out_root/<id>/`, up to cfg.jobs at a time.
/// Failures are recorded and do not stop the batch; records with a valid
/// caption already on disk are skipped. Writes `out_root/run_report.json`.
inline BatchReport batch_run(const Manifest& manifest, const std::filesystem::path& out_root, PipelineContext& ctx) {
  BatchReport rep;
  rep.started_at = utc_now();
  rep.records.resize(manifest.records.size());
  parallel_for(manifest.records.size(), ctx.cfg.jobs, [&](size_t i) {
    const auto& r = manifest.records[i];
    auto& res = rep.records[i];
    res.id = r.id;
    const auto dir = out_root / r.id;
    if (has_valid_caption(dir)) {
      res.status = "skipped";
      return;
    }
    try {
      caption_video(manifest.resolve(r.path).string(), dir, ctx);
      res.status = "ok";
    } catch (const std::exception& e) {
      res.status = "failed";
      res.reason = e.what();
    }
  });
  for (const auto& r : rep.records) {
    if (r.status == "ok") ++rep.ok;
    else if (r.status == "failed") ++rep.failed;
    else ++rep.skipped;
  }
  rep.finished_at = utc_now();
  std::filesystem::create_directories(out_root);
  detail::write_text(out_root / "run_report.json", to_json(rep).dump(2) + "\n");
  return rep;
}

}  // namespace instcap
