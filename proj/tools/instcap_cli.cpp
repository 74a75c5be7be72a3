// SPDX-License-Identifier: Apache-2.0
// instcap command-line front end.

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "instcap/instcap.hpp"

namespace fs = std::filesystem;
using namespace instcap;

namespace {

enum Exit { kOk = 0, kConfig = 2, kInput = 3, kBackend = 4 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::ContractError:
      return kConfig;
    case ErrorKind::AdapterError:
    case ErrorKind::BackendError:
    case ErrorKind::ParseError:
      return kBackend;
    default:
      return kInput;
  }
}

fs::path default_data_root() {
  if (const char* v = std::getenv("INSTCAP_DATA_ROOT"); v && *v) return v;
#ifdef INSTCAP_DATA_DIR
  return INSTCAP_DATA_DIR;
#else
  return fs::current_path();
#endif
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << s;
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + p.string());
}

/// Options shared by the commands that talk to the adapter and chat backend.
struct ServiceFlags {
  std::string config;
  std::string data_root;
  std::optional<std::string> adapter_url, chat_url, adapter_script, chat_script, model, visual_prompt;
  std::optional<int> frames, retry_budget;
  std::optional<int64_t> seed;
  std::optional<size_t> jobs;
  bool no_camera_hint = false, no_class_hints = false, no_lexicon = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "TOML-like run config file");
    app->add_option("--data-root", data_root, "directory holding prompts/ and data/");
    app->add_option("--adapter-url", adapter_url, "model adapter base URL (default: in-process mock)");
    app->add_option("--adapter-script", adapter_script, "mock adapter script (JSON)");
    app->add_option("--chat-url", chat_url, "chat backend base URL (default: in-process mock)");
    app->add_option("--chat-script", chat_script, "mock chat script (JSON)");
    app->add_option("--model", model, "chat model id");
    app->add_option("--frames", frames, "frames sampled per video");
    app->add_option("--retry-budget", retry_budget, "corrective re-asks per conversation");
    app->add_option("--visual-prompt", visual_prompt, "blur | red-screen | bbox-overlay");
    app->add_option("--seed", seed, "seed recorded in outputs and sent to the backend");
    app->add_option("--jobs", jobs, "records captioned concurrently");
    app->add_flag("--no-camera-hint", no_camera_hint, "let the chat model pick the camera movement");
    app->add_flag("--no-class-hints", no_class_hints, "omit per-class hints");
    app->add_flag("--no-lexicon", no_lexicon, "omit lexicon guidance");
  }

  RunConfig resolve() const {
    auto cfg = RunConfig::with_data_root(data_root.empty() ? default_data_root() : fs::path(data_root));
    if (!config.empty()) cfg.apply(KeyValueConfig::load(config), fs::path(config).parent_path());
    cfg.apply_env();
    if (adapter_url) cfg.adapter_url = *adapter_url;
    if (chat_url) cfg.chat_url = *chat_url;
    if (adapter_script) cfg.adapter_script = *adapter_script;
    if (chat_script) cfg.chat_script = *chat_script;
    if (model) cfg.backend.model = *model;
    if (frames) cfg.sample_frames = *frames;
    if (retry_budget) cfg.retry_budget = *retry_budget;
    if (visual_prompt) {
      auto vp = visual_prompt_from_string(*visual_prompt);
      if (!vp) throw Error(ErrorKind::ConfigError, "unknown visual prompt " + *visual_prompt);
      cfg.amc.visual_prompt = *vp;
    }
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (no_camera_hint) cfg.use_camera_hint = false;
    if (no_class_hints) cfg.use_class_hints = false;
    if (no_lexicon) cfg.use_lexicon = false;
    cfg.backend.seed = cfg.seed;
    cfg.validate();
    return cfg;
  }
};

std::unique_ptr<ChatBackend> make_chat(const std::optional<std::string>& url, const std::optional<std::string>& script) {
  std::string u = url.value_or("");
  if (u.empty())
    if (const char* v = std::getenv("INSTCAP_CHAT_URL"); v && *v) u = v;
  HttpOptions http;
  if (const char* v = std::getenv("INSTCAP_API_TOKEN"); v && *v) http.token = v;
  if (!u.empty()) return std::make_unique<HttpChatBackend>(u, http);
  if (script) return std::make_unique<MockChatBackend>(MockChatBackend::script_from_json(PipelineContext::read_json(*script)));
  return std::make_unique<MockChatBackend>(MockChatBackend::echo_responder());
}

std::unique_ptr<ModelAdapter> make_adapter(const std::optional<std::string>& url, const std::optional<std::string>& script) {
  std::string u = url.value_or("");
  if (u.empty())
    if (const char* v = std::getenv("INSTCAP_ADAPTER_URL"); v && *v) u = v;
  HttpOptions http;
  if (const char* v = std::getenv("INSTCAP_API_TOKEN"); v && *v) http.token = v;
  if (!u.empty()) return std::make_unique<HttpModelAdapter>(u, http);
  MockModelAdapter::Script s;
  if (script) s = MockModelAdapter::script_from_json(PipelineContext::read_json(*script));
  return std::make_unique<MockModelAdapter>(std::move(s));
}

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instance-aware structured video captioning toolkit"};
  app.require_subcommand(1);

  // caption
  auto* caption = app.add_subcommand("caption", "caption one video (a directory of %06d.png frames, or any file with an external decoder)");
  ServiceFlags cap_flags;
  std::string cap_video, cap_out;
  caption->add_option("--video", cap_video, "video path")->required();
  caption->add_option("--out", cap_out, "output directory")->required();
  cap_flags.add(caption);

  // batch
  auto* batch = app.add_subcommand("batch", "caption every record of a manifest");
  ServiceFlags batch_flags;
  std::string batch_manifest, batch_out;
  batch->add_option("--manifest", batch_manifest, "JSONL manifest")->required();
  batch->add_option("--out", batch_out, "output root")->required();
  batch_flags.add(batch);

  // enhance
  auto* enhance = app.add_subcommand("enhance", "expand a short prompt into a structured caption");
  std::string enh_prompt, enh_prompts_file, enh_out, enh_style = "flat", enh_data_root;
  std::optional<std::string> enh_chat_url, enh_chat_script;
  std::string enh_backend = "mock";
  int enh_retry = 1;
  auto* enh_prompt_opt = enhance->add_option("--prompt", enh_prompt, "short prompt");
  enhance->add_option("--prompts-file", enh_prompts_file, "newline-delimited prompts (batch mode)")->excludes(enh_prompt_opt);
  enhance->add_option("--backend", enh_backend, "mock | http")->check(CLI::IsMember({"mock", "http"}));
  enhance->add_option("--chat-url", enh_chat_url, "chat backend URL for --backend http");
  enhance->add_option("--chat-script", enh_chat_script, "mock chat script (JSON)");
  enhance->add_option("--out", enh_out, "output file (default: stdout)");
  enhance->add_option("--style", enh_style, "flat | structured | json")->check(CLI::IsMember({"flat", "structured", "json"}));
  enhance->add_option("--retry-budget", enh_retry, "re-asks per stage");
  enhance->add_option("--data-root", enh_data_root, "directory holding prompts/ and data/");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluation metrics");
  eval->require_subcommand(1);
  auto* eval_vae = eval->add_subcommand("vae", "weighted latent distance between two tensor files");
  std::string vae_gt, vae_rec;
  std::vector<double> vae_weights;
  bool vae_per_element = false;
  eval_vae->add_option("--gt", vae_gt, "ground-truth latent tensor file")->required()->check(CLI::ExistingFile);
  eval_vae->add_option("--rec", vae_rec, "reconstructed latent tensor file")->required()->check(CLI::ExistingFile);
  eval_vae->add_option("--layer-weights", vae_weights, "one scalar weight per layer (default 1)");
  eval_vae->add_flag("--per-element", vae_per_element, "also report the distance divided by the element count");

  auto* eval_sbs = eval->add_subcommand("senbysen", "sentence-by-sentence text/frame similarity");
  std::string sbs_caption, sbs_frames;
  std::optional<std::string> sbs_adapter_url, sbs_adapter_script;
  int sbs_n = kDefaultSampledFrames;
  eval_sbs->add_option("--caption", sbs_caption, "caption.json or plain-text caption")->required()->check(CLI::ExistingFile);
  eval_sbs->add_option("--frames", sbs_frames, "frame directory")->required();
  eval_sbs->add_option("--sample", sbs_n, "frames sampled");
  eval_sbs->add_option("--adapter-url", sbs_adapter_url, "model adapter URL (default: mock)");
  eval_sbs->add_option("--adapter-script", sbs_adapter_script, "mock adapter script");

  auto* eval_ins = eval->add_subcommand("inseval", "judge generated videos against the Inseval pack");
  std::string ins_videos, ins_pack, ins_out;
  int64_t ins_seed = 0;
  int ins_n = kDefaultSampledFrames;
  bool ins_extended = false;
  std::optional<std::string> ins_chat_url, ins_chat_script;
  eval_ins->add_option("--videos", ins_videos, "JSONL manifest: {id: <prompt id>, path: <frame dir>, duration}")->required();
  eval_ins->add_option("--prompts", ins_pack, "Inseval prompt pack (JSON)")->required();
  eval_ins->add_option("--seed", ins_seed, "judge seed");
  eval_ins->add_option("--sample", ins_n, "frames shown to the judge");
  eval_ins->add_flag("--extended", ins_extended, "also score Multiple-Shape and Multiple-Detail");
  eval_ins->add_option("--chat-url", ins_chat_url, "judge chat backend URL (default: mock)");
  eval_ins->add_option("--chat-script", ins_chat_script, "mock judge script");
  eval_ins->add_option("--out", ins_out, "report JSON");

  // dataset
  auto* dataset = app.add_subcommand("dataset", "manifest curation and statistics");
  dataset->require_subcommand(1);
  auto* curate_cmd = dataset->add_subcommand("curate", "filter a manifest");
  std::string cur_in, cur_out, cur_log;
  CurationFilter filter;
  std::optional<double> min_motion;
  curate_cmd->add_option("--in", cur_in, "input JSONL")->required();
  curate_cmd->add_option("--out", cur_out, "output JSONL")->required();
  curate_cmd->add_option("--min-dur", filter.min_duration, "minimum duration (s)");
  curate_cmd->add_option("--max-dur", filter.max_duration, "maximum duration (s)");
  curate_cmd->add_option("--min-motion", min_motion, "minimum motion intensity (px/frame)");
  curate_cmd->add_flag("--require-instance", filter.require_instance, "keep only records whose caption has an instance");
  curate_cmd->add_option("--rejections", cur_log, "write rejection reasons as JSON");
  auto* stats_cmd = dataset->add_subcommand("stats", "dataset statistics");
  std::string st_in, st_out;
  stats_cmd->add_option("--in", st_in, "input JSONL")->required();
  stats_cmd->add_option("--out", st_out, "output JSON (default: stdout)");

  // mock-adapter
  auto* mock = app.add_subcommand("mock-adapter", "in-process mock of the adapter service");
  mock->require_subcommand(1);
  auto* serve = mock->add_subcommand("serve", "serve the adapter wire contract");
  std::string srv_host = "127.0.0.1", srv_token;
  int srv_port = 8765;
  std::optional<std::string> srv_adapter_script, srv_chat_script;
  serve->add_option("--host", srv_host, "bind address");
  serve->add_option("--port", srv_port, "port (0 picks a free one)");
  serve->add_option("--adapter-script", srv_adapter_script, "mock adapter script");
  serve->add_option("--chat-script", srv_chat_script, "mock chat script (default: echo)");
  serve->add_option("--token", srv_token, "require this bearer token");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*caption) {
      auto ctx = PipelineContext::build(cap_flags.resolve());
      auto outcome = caption_video(cap_video, cap_out, *ctx);
      std::cout << "caption: " << (fs::path(cap_out) / "caption.json").string() << " (" << outcome.caption.instances.size()
                << " instances, camera " << to_string(outcome.caption.camera.basic_movement) << ")\n";
      return kOk;
    }
    if (*batch) {
      auto ctx = PipelineContext::build(batch_flags.resolve());
      auto manifest = load_manifest(batch_manifest);
      auto rep = batch_run(manifest, batch_out, *ctx);
      std::cout << "ok " << rep.ok << ", failed " << rep.failed << ", skipped " << rep.skipped << "\n";
      for (const auto& r : rep.records)
        if (r.status == "failed") std::cerr << r.id << ": " << r.reason << "\n";
      return kOk;
    }
    if (*enhance) {
      if (enh_prompt.empty() && enh_prompts_file.empty()) throw Error(ErrorKind::ConfigError, "give --prompt or --prompts-file");
      const fs::path root = enh_data_root.empty() ? default_data_root() : fs::path(enh_data_root);
      auto pack = EnhancerPack::load(root / "prompts" / "enhancer");
      EnhancerOptions opt;
      opt.retry_budget = enh_retry;
      opt.stopwords = load_stopwords(root / "data" / "stopwords.txt");
      opt.examples = pack.examples;
      if (enh_backend == "http" && !enh_chat_url && !std::getenv("INSTCAP_CHAT_URL"))
        throw Error(ErrorKind::ConfigError, "--backend http needs --chat-url or INSTCAP_CHAT_URL");
      auto chat = make_chat(enh_backend == "http" ? enh_chat_url : std::nullopt, enh_chat_script);
      Enhancer enhancer(*chat, BackendConfig{}, pack.prompts, opt);
      auto run_one = [&](const std::string& prompt) {
        auto [text, job] = enhancer.enhance(prompt, enh_style == "structured" ? RenderStyle::Structured : RenderStyle::FlatTrainingText);
        if (!job.flags.empty()) {
          std::cerr << "flags:";
          for (const auto& f : job.flags) std::cerr << " " << f;
          std::cerr << "\n";
        }
        if (enh_style == "json") return to_json(*job.final).dump();
        return text;
      };
      std::string out;
      if (!enh_prompt.empty()) {
        out = run_one(enh_prompt);
        if (out.empty() || out.back() != '\n') out += "\n";
      } else {
        std::istringstream in(read_file(enh_prompts_file));
        std::string line;
        while (std::getline(in, line)) {
          if (text::trim(line).empty()) continue;
          auto j = to_json(*enhancer.enhance(line).second.final);
          out += j.dump() + "\n";
        }
      }
      if (enh_out.empty())
        std::cout << out;
      else
        write_file(enh_out, out);
      return kOk;
    }
    if (*eval_vae) {
      auto gt = tensor_file::read(vae_gt);
      auto rec = tensor_file::read(vae_rec);
      LayerWeights w = LayerWeights::unit(gt.shape.empty() ? 1 : gt.shape[0]);
      if (!vae_weights.empty()) {
        w.layers.clear();
        for (double v : vae_weights) w.layers.push_back(WeightTensor::scalar(v));
      }
      nlohmann::ordered_json j;
      j["vae_distance"] = vae_distance(gt, rec, w);
      if (vae_per_element) j["vae_distance_per_element"] = vae_distance_per_element(gt, rec, w);
      std::cout << j.dump(2) << "\n";
      return kOk;
    }
    if (*eval_sbs) {
      const auto raw = read_file(sbs_caption);
      std::string caption_text = raw;
      try {
        caption_text = render_caption(parse_caption_text(raw), RenderStyle::FlatTrainingText);
      } catch (const Error&) {
      }
      auto sentences = split_sentences(caption_text);
      ImageDirectoryProvider provider;
      auto frames = sample_frames(provider, sbs_frames, sbs_n);
      auto adapter = make_adapter(sbs_adapter_url, sbs_adapter_script);
      auto m = similarity_matrix(sentences, frames, *adapter);
      nlohmann::ordered_json j;
      j["sentences"] = sentences.size();
      j["frames"] = frames.size();
      j["clip_senbysen"] = clip_senbysen(m);
      std::cout << j.dump(2) << "\n";
      return kOk;
    }
    if (*eval_ins) {
      auto registry = InsevalRegistry::load(ins_pack);
      auto manifest = load_manifest(ins_videos);
      auto chat = make_chat(ins_chat_url, ins_chat_script);
      ImageDirectoryProvider provider;
      std::vector<JudgeVerdict> verdicts;
      nlohmann::ordered_json vj = nlohmann::ordered_json::array();
      for (const auto& r : manifest.records) {
        const auto& p = registry.find(r.id);
        const auto dir = fs::absolute(manifest.resolve(r.path));
        auto info = provider.probe(dir.string());
        std::vector<std::string> refs;
        for (auto idx : sample_indices(info.frame_count, ins_n)) refs.push_back(ImageDirectoryProvider::frame_path(dir, idx).string());
        verdicts.push_back(inseval_judge(refs, p, registry.judge, *chat, BackendConfig{}, ins_seed));
        vj.push_back(to_json(verdicts.back()));
      }
      auto rep = inseval_score(verdicts, registry, ins_extended);
      std::cout << format_table(rep);
      if (!ins_out.empty()) {
        auto j = to_json(rep);
        j["seed"] = ins_seed;
        j["verdicts"] = vj;
        write_file(ins_out, j.dump(2) + "\n");
      }
      return kOk;
    }
    if (*curate_cmd) {
      filter.min_motion = min_motion;
      auto m = load_manifest(cur_in);
      auto res = curate(m, filter);
      write_file(cur_out, res.kept.to_jsonl());
      for (const auto& r : res.rejected) {
        std::cerr << r.id << ":";
        for (const auto& x : r.reasons) std::cerr << " " << x;
        std::cerr << "\n";
      }
      if (!cur_log.empty()) write_file(cur_log, to_json(res).dump(2) + "\n");
      std::cout << "kept " << res.kept.records.size() << " of " << m.records.size() << "\n";
      return kOk;
    }
    if (*stats_cmd) {
      auto s = dataset_stats(load_manifest(st_in));
      const auto out = to_json(s).dump(2) + "\n";
      if (st_out.empty())
        std::cout << out;
      else
        write_file(st_out, out);
      return kOk;
    }
    if (*serve) {
      auto adapter = make_adapter(std::nullopt, srv_adapter_script);
      auto chat = make_chat(std::nullopt, srv_chat_script);
      AdapterServer server(*adapter, chat.get(), srv_token);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int port = server.start(srv_host, srv_port);
      std::cout << "serving on http://" << srv_host << ":" << port << std::endl;
      while (!g_stop && server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
  return kOk;
}
