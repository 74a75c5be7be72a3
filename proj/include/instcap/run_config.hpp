// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "instcap/amc.hpp"
#include "instcap/chat.hpp"
#include "instcap/error.hpp"
#include "instcap/text.hpp"
#include "instcap/video_ingest.hpp"

namespace instcap {

/// Flat `section.key -> value` view of a TOML-like file: `[section]`
/// headers, `key = value` lines, `#` comments, values bare or double-quoted.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& content, const std::string& name = "config") {
    KeyValueConfig c;
    std::istringstream in(content);
    std::string line, section;
    for (size_t n = 1; std::getline(in, line); ++n) {
      auto t = text::trim(strip_comment(line));
      if (t.empty()) continue;
      const auto where = name + ":" + std::to_string(n);
      if (t.front() == '[') {
        if (t.back() != ']') throw Error(ErrorKind::ConfigError, where + ": unterminated section header");
        section = text::trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw Error(ErrorKind::ConfigError, where + ": expected key = value");
      auto key = text::trim(t.substr(0, eq));
      auto value = text::trim(t.substr(eq + 1));
      if (key.empty()) throw Error(ErrorKind::ConfigError, where + ": empty key");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      c.values_[section.empty() ? key : section + "." + key] = value;
    }
    return c;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.filename().string());
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    return it == values_.end() ? std::nullopt : std::optional<std::string>(it->second);
  }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
  }

  std::map<std::string, std::string> values_;
};

struct RunConfig {
  // Frame provider.
  std::string provider = "images";  ///< images | external
  double default_fps = 30.0;
  std::string decoder_probe;
  std::string decoder_extract;
  int sample_frames = kDefaultSampledFrames;

  // Model adapter: HTTP when `adapter_url` is set, otherwise the mock with an optional script.
  std::string adapter_url;
  std::filesystem::path adapter_script;

  // Chat backend: HTTP when `chat_url` is set, otherwise the mock (scripted or echo).
  std::string chat_url;
  std::filesystem::path chat_script;
  std::string api_token;
  BackendConfig backend;
  int retry_budget = 2;
  size_t max_in_flight = 4;
  double requests_per_second = 0.0;  ///< 0 disables rate limiting

  AmcConfig amc;
  bool use_camera_hint = true;
  bool use_class_hints = true;
  bool use_lexicon = true;

  std::filesystem::path prompts_dir;
  std::filesystem::path class_hints;
  std::filesystem::path lexicon_dir;
  std::filesystem::path output_dir = "out";
  int64_t seed = 0;
  size_t jobs = 1;

  /// Defaults pointing at the shipped prompt and data packs under `root`.
  static RunConfig with_data_root(const std::filesystem::path& root) {
    RunConfig c;
    c.prompts_dir = root / "prompts";
    c.class_hints = root / "data" / "class_hints.json";
    c.lexicon_dir = root / "data" / "lexicon";
    return c;
  }

  /// Applies keys from `kv`. Relative paths resolve against `base`.
  void apply(const KeyValueConfig& kv, const std::filesystem::path& base = {}) {
    auto path = [&](const std::string& v) {
      std::filesystem::path p(v);
      return p.is_absolute() || base.empty() ? p : base / p;
    };
    for (const auto& [key, v] : kv.values()) {
      try {
        if (key == "input.provider") provider = v;
        else if (key == "input.default_fps") default_fps = std::stod(v);
        else if (key == "input.decoder_probe") decoder_probe = v;
        else if (key == "input.decoder_extract") decoder_extract = v;
        else if (key == "input.sample_frames") sample_frames = std::stoi(v);
        else if (key == "adapter.url") adapter_url = v;
        else if (key == "adapter.script") adapter_script = path(v);
        else if (key == "chat.url") chat_url = v;
        else if (key == "chat.script") chat_script = path(v);
        else if (key == "chat.model") backend.model = v;
        else if (key == "chat.temperature") backend.temperature = std::stod(v);
        else if (key == "chat.max_tokens") backend.max_tokens = std::stoi(v);
        else if (key == "chat.retry_budget") retry_budget = std::stoi(v);
        else if (key == "chat.max_in_flight") max_in_flight = static_cast<size_t>(std::stoul(v));
        else if (key == "chat.requests_per_second") requests_per_second = std::stod(v);
        else if (key == "amc.confidence_threshold") amc.confidence_threshold = std::stod(v);
        else if (key == "amc.max_instances") amc.max_instances = static_cast<size_t>(std::stoul(v));
        else if (key == "amc.blur_sigma") amc.blur_sigma = std::stod(v);
        else if (key == "amc.visual_prompt") {
          auto vp = visual_prompt_from_string(v);
          if (!vp) throw std::invalid_argument(v);
          amc.visual_prompt = *vp;
        }
        else if (key == "amc.flow_source") amc.flow_source = parse_flow_source(v);
        else if (key == "amc.flow_grid") amc.flow.grid = std::stoi(v);
        else if (key == "amc.search_radius") amc.flow.search_radius = std::stoi(v);
        else if (key == "amc.static_threshold") amc.camera.static_px_per_frame = std::stod(v);
        else if (key == "amc.margin") amc.camera.margin = std::stod(v);
        else if (key == "amc.workers") amc.workers = static_cast<size_t>(std::stoul(v));
        else if (key == "prompts.use_camera_hint") use_camera_hint = parse_bool(v);
        else if (key == "prompts.use_class_hints") use_class_hints = parse_bool(v);
        else if (key == "prompts.use_lexicon") use_lexicon = parse_bool(v);
        else if (key == "paths.prompts") prompts_dir = path(v);
        else if (key == "paths.class_hints") class_hints = path(v);
        else if (key == "paths.lexicon") lexicon_dir = path(v);
        else if (key == "paths.output") output_dir = path(v);
        else if (key == "run.seed") seed = std::stoll(v);
        else if (key == "run.jobs") jobs = static_cast<size_t>(std::stoul(v));
        else throw Error(ErrorKind::ConfigError, "unknown config key " + key);
      } catch (const std::logic_error&) {
        throw Error(ErrorKind::ConfigError, "bad value for " + key + ": \"" + v + "\"");
      }
    }
    backend.seed = seed;
  }

  /// Endpoint and secret overrides from INSTCAP_ADAPTER_URL,
  /// INSTCAP_CHAT_URL and INSTCAP_API_TOKEN.
  void apply_env() {
    if (const char* v = std::getenv("INSTCAP_ADAPTER_URL"); v && *v) adapter_url = v;
    if (const char* v = std::getenv("INSTCAP_CHAT_URL"); v && *v) chat_url = v;
    if (const char* v = std::getenv("INSTCAP_API_TOKEN"); v && *v) api_token = v;
  }

  void validate() const {
    auto need = [](const std::filesystem::path& p, const char* what) {
      std::error_code ec;
      if (p.empty() || !std::filesystem::exists(p, ec))
        throw Error(ErrorKind::ConfigError, std::string(what) + " not found: " + p.string());
    };
    need(prompts_dir, "prompt directory");
    need(class_hints, "class hint pack");
    need(lexicon_dir, "lexicon directory");
    if (!adapter_script.empty()) need(adapter_script, "adapter script");
    if (!chat_script.empty()) need(chat_script, "chat script");
    if (provider != "images" && provider != "external") throw Error(ErrorKind::ConfigError, "provider must be images or external");
    if (provider == "external" && (decoder_probe.empty() || decoder_extract.empty()))
      throw Error(ErrorKind::ConfigError, "external provider needs decoder_probe and decoder_extract");
    if (sample_frames < 1) throw Error(ErrorKind::ConfigError, "sample_frames must be >= 1");
    if (retry_budget < 0) throw Error(ErrorKind::ConfigError, "retry_budget must be >= 0");
    if (backend.temperature < 0) throw Error(ErrorKind::ConfigError, "temperature must be >= 0");
    if (amc.confidence_threshold < 0 || amc.confidence_threshold > 1)
      throw Error(ErrorKind::ConfigError, "confidence_threshold must be in [0, 1]");
    if (amc.blur_sigma <= 0) throw Error(ErrorKind::ConfigError, "blur_sigma must be > 0");
    if (jobs < 1) throw Error(ErrorKind::ConfigError, "jobs must be >= 1");
  }

  /// Settings recorded next to every output (no secrets, no output path).
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["sample_frames"] = sample_frames;
    j["adapter"] = adapter_url.empty() ? "mock" : "http";
    j["chat"] = chat_url.empty() ? "mock" : "http";
    j["model"] = backend.model;
    j["temperature"] = backend.temperature;
    j["max_tokens"] = backend.max_tokens;
    j["retry_budget"] = retry_budget;
    j["visual_prompt"] = std::string(to_string(amc.visual_prompt));
    j["use_camera_hint"] = use_camera_hint;
    j["use_class_hints"] = use_class_hints;
    j["use_lexicon"] = use_lexicon;
    return j;
  }

  static bool parse_bool(const std::string& v) {
    const auto l = text::to_lower(v);
    if (l == "true" || l == "1" || l == "yes") return true;
    if (l == "false" || l == "0" || l == "no") return false;
    throw std::invalid_argument(v);
  }

  static FlowSource parse_flow_source(const std::string& v) {
    if (v == "internal") return FlowSource::Internal;
    if (v == "adapter") return FlowSource::Adapter;
    throw std::invalid_argument(v);
  }
};

}  // namespace instcap
