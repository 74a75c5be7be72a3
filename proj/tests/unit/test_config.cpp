#include <cstdlib>
#include <functional>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "instcap/run_config.hpp"

using namespace instcap;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no instcap::Error thrown";
  return ErrorKind::ContractError;
}

// Restores an environment variable on scope exit.
struct EnvGuard {
  std::string name;
  std::optional<std::string> saved;
  EnvGuard(std::string n, const char* value) : name(std::move(n)) {
    if (const char* v = std::getenv(name.c_str())) saved = v;
    if (value) ::setenv(name.c_str(), value, 1);
    else ::unsetenv(name.c_str());
  }
  ~EnvGuard() {
    if (saved) ::setenv(name.c_str(), saved->c_str(), 1);
    else ::unsetenv(name.c_str());
  }
};

}  // namespace

TEST(KeyValueConfig, SectionsCommentsAndQuotes) {
  const auto kv = KeyValueConfig::parse(
      "top = 1\n"
      "# full-line comment\n"
      "[chat]\n"
      "  model = \"gpt # not a comment\"   # trailing\n"
      "temperature=0.2\n"
      "\n"
      "[ amc ]\n"
      "visual_prompt = red-screen\n");
  EXPECT_EQ(kv.values().size(), 4u);
  EXPECT_EQ(kv.get("top"), "1");
  EXPECT_EQ(kv.get("chat.model"), "gpt # not a comment");
  EXPECT_EQ(kv.get("chat.temperature"), "0.2");
  EXPECT_EQ(kv.get("amc.visual_prompt"), "red-screen");
  EXPECT_FALSE(kv.has("model"));
}

TEST(KeyValueConfig, MalformedLinesNameTheLine) {
  try {
    KeyValueConfig::parse("[chat]\nmodel = x\n[amc\n", "run.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    EXPECT_NE(e.detail().find("run.toml:3"), std::string::npos) << e.detail();
  }
  EXPECT_EQ(kind_of([] { KeyValueConfig::parse("just words\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([] { KeyValueConfig::parse(" = 3\n"); }), ErrorKind::ConfigError);
}

TEST(KeyValueConfig, MissingFileIsConfigError) {
  EXPECT_EQ(kind_of([] { KeyValueConfig::load("/nonexistent/instcap.toml"); }), ErrorKind::ConfigError);
}

TEST(RunConfig, AppliesKeysAndResolvesRelativePaths) {
  auto cfg = RunConfig::with_data_root("/data");
  const auto kv = KeyValueConfig::parse(
      "[chat]\nscript = scripts/chat.json\ntemperature = 0.3\nretry_budget = 5\n"
      "[amc]\nvisual_prompt = bbox-overlay\nmax_instances = 3\nstatic_threshold = 0.75\n"
      "[paths]\noutput = /abs/out\nprompts = p\n"
      "[prompts]\nuse_lexicon = no\n"
      "[run]\nseed = 17\n");
  cfg.apply(kv, "/etc/instcap");
  EXPECT_EQ(cfg.chat_script, std::filesystem::path("/etc/instcap/scripts/chat.json"));
  EXPECT_EQ(cfg.prompts_dir, std::filesystem::path("/etc/instcap/p"));
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/abs/out"));
  EXPECT_EQ(cfg.class_hints, std::filesystem::path("/data/data/class_hints.json"));
  EXPECT_DOUBLE_EQ(cfg.backend.temperature, 0.3);
  EXPECT_EQ(cfg.retry_budget, 5);
  EXPECT_EQ(cfg.amc.visual_prompt, VisualPrompt::BboxOverlay);
  EXPECT_EQ(cfg.amc.max_instances, 3u);
  EXPECT_DOUBLE_EQ(cfg.amc.camera.static_px_per_frame, 0.75);
  EXPECT_FALSE(cfg.use_lexicon);
  EXPECT_EQ(cfg.seed, 17);
  EXPECT_EQ(cfg.backend.seed, 17);
}

TEST(RunConfig, UnknownKeyAndBadValues) {
  auto apply = [](const std::string& text) {
    return kind_of([&] {
      RunConfig cfg;
      cfg.apply(KeyValueConfig::parse(text));
    });
  };
  EXPECT_EQ(apply("[chat]\nmodle = x\n"), ErrorKind::ConfigError);
  EXPECT_EQ(apply("[chat]\ntemperature = warm\n"), ErrorKind::ConfigError);
  EXPECT_EQ(apply("[amc]\nvisual_prompt = sepia\n"), ErrorKind::ConfigError);
  EXPECT_EQ(apply("[amc]\nflow_source = oracle\n"), ErrorKind::ConfigError);
  EXPECT_EQ(apply("[prompts]\nuse_lexicon = maybe\n"), ErrorKind::ConfigError);
  EXPECT_EQ(apply("[input]\nsample_frames = \n"), ErrorKind::ConfigError);
}

TEST(RunConfig, EnvironmentOverridesFile) {
  EnvGuard a("INSTCAP_ADAPTER_URL", "http://adapter:1");
  EnvGuard c("INSTCAP_CHAT_URL", "");
  EnvGuard t("INSTCAP_API_TOKEN", "s3cret");
  RunConfig cfg;
  cfg.apply(KeyValueConfig::parse("[adapter]\nurl = http://file:2\n[chat]\nurl = http://file:3\n"));
  cfg.apply_env();
  EXPECT_EQ(cfg.adapter_url, "http://adapter:1");
  EXPECT_EQ(cfg.chat_url, "http://file:3");  // empty variable leaves the file value
  EXPECT_EQ(cfg.api_token, "s3cret");
}

TEST(RunConfig, ValidateRejectsBadSettings) {
  const auto good = RunConfig::with_data_root(fixtures::source_dir());
  EXPECT_NO_THROW(good.validate());

  auto broken = [&](auto mutate) {
    auto cfg = good;
    mutate(cfg);
    return kind_of([&] { cfg.validate(); });
  };
  EXPECT_EQ(broken([](RunConfig& c) { c.prompts_dir = "/nonexistent"; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.chat_script = "/nonexistent.json"; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.provider = "ffmpeg"; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.provider = "external"; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.sample_frames = 0; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.retry_budget = -1; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.backend.temperature = -0.1; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.amc.confidence_threshold = 1.5; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.amc.blur_sigma = 0; }), ErrorKind::ConfigError);
  EXPECT_EQ(broken([](RunConfig& c) { c.jobs = 0; }), ErrorKind::ConfigError);
}

TEST(RunConfig, RecordedSettingsCarryNoSecrets) {
  auto cfg = RunConfig::with_data_root("/data");
  cfg.api_token = "s3cret";
  cfg.chat_url = "http://chat:9";
  cfg.output_dir = "/private/out";
  const auto dumped = cfg.to_json().dump();
  EXPECT_EQ(dumped.find("s3cret"), std::string::npos);
  EXPECT_EQ(dumped.find("/private/out"), std::string::npos);
  EXPECT_EQ(dumped.find("chat:9"), std::string::npos);
  EXPECT_EQ(cfg.to_json()["chat"], "http");
  EXPECT_EQ(cfg.to_json()["adapter"], "mock");
}

TEST(RunConfig, ShippedExampleConfigLoads) {
  const auto file = fixtures::source_dir() / "docs/example_config.toml";
  RunConfig cfg;
  cfg.apply(KeyValueConfig::load(file), file.parent_path());
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_TRUE(std::filesystem::exists(cfg.chat_script));
  EXPECT_EQ(cfg.amc.max_instances, RunConfig{}.amc.max_instances);
  EXPECT_DOUBLE_EQ(cfg.amc.blur_sigma, kDefaultBlurSigma);
}
