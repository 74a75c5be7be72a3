#include <gtest/gtest.h>

#include "e2e.hpp"

using namespace instcap;

namespace {

const std::filesystem::path& square_dir() {
  static fixtures::TempDir dir("pipeline");
  static const bool written = (fixtures::MovingSquare::write(dir.path() / "square"), true);
  (void)written;
  static const auto p = dir.path() / "square";
  return p;
}

Error error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorKind::ContractError, "none");
}

const std::filesystem::path kGolden = fixtures::source_dir() / "tests/golden/moving_square_caption.json";

}  // namespace

TEST(EndToEnd, MovingSquareCaption) {
  fixtures::TempDir out("pipeline");
  const auto run = fixtures::run_square(square_dir(), out.path() / "a");
  const auto& c = run.outcome.caption;
  EXPECT_NO_THROW(validate(c));
  ASSERT_EQ(c.instances.size(), 1u);
  EXPECT_EQ(c.instances[0].id, "i0");
  EXPECT_EQ(c.instances[0].class_name, "square");
  EXPECT_EQ(c.camera.basic_movement, CameraMotion::PanLeft);
  EXPECT_EQ(run.outcome.amc.camera.motion, CameraMotion::PanLeft);
  ASSERT_TRUE(c.source_meta);
  EXPECT_EQ(c.source_meta->frame_count, 16);
  EXPECT_DOUBLE_EQ(c.source_meta->duration, 2.0);
  ASSERT_TRUE(c.instances[0].bbox_track);
  EXPECT_EQ(c.instances[0].bbox_track->size(), 8u);
  EXPECT_EQ(c.instances[0].bbox_track->at(4).frame_index, 9);
  EXPECT_EQ(c.instances[0].bbox_track->at(4).box, fixtures::MovingSquare::square_box(9));
  EXPECT_EQ(load_caption(out.path() / "a/caption.json"), c);
  for (const char* f : {"caption.json", "run.json", "transcripts.jsonl", "amc_result.json", "frames/000009.png", "instance_i0/000009.png"})
    EXPECT_TRUE(run.tree.count(f)) << f;
}

TEST(EndToEnd, ByteIdenticalAcrossRuns) {
  fixtures::TempDir out("pipeline");
  const auto a = fixtures::run_square(square_dir(), out.path() / "a");
  const auto b = fixtures::run_square(square_dir(), out.path() / "b");
  ASSERT_EQ(a.tree.size(), b.tree.size());
  for (const auto& [name, bytes] : a.tree) {
    ASSERT_TRUE(b.tree.count(name)) << name;
    EXPECT_TRUE(b.tree.at(name) == bytes) << name << " differs";
  }
}

TEST(EndToEnd, MatchesGolden) {
  fixtures::TempDir out("pipeline");
  const auto run = fixtures::run_square(square_dir(), out.path() / "a");
  ASSERT_TRUE(std::filesystem::exists(kGolden));
  EXPECT_EQ(run.tree.at("caption.json"), fixtures::read_file(kGolden));
}

TEST(EndToEnd, ConversationAudits) {
  fixtures::TempDir out("pipeline");
  const auto run = fixtures::run_square(square_dir(), out.path() / "a");
  EXPECT_EQ(fixtures::audit_instance_isolation(run, out.path() / "a"), "");
  EXPECT_EQ(fixtures::audit_global_injection(run), "");
  // The overlong first global reply was corrected, not truncated.
  EXPECT_TRUE(run.outcome.flags.empty());
  EXPECT_EQ(run.outcome.caption.global_summary,
            "A red square glides toward the lower right while the textured backdrop drifts as the camera pans left.");
}

TEST(EndToEnd, UnreadableVideoIsStageTagged) {
  fixtures::TempDir out("pipeline");
  const auto e = error_of([&] { fixtures::run_square(out.path() / "missing", out.path() / "a"); });
  EXPECT_EQ(e.kind(), ErrorKind::DecodeError);
  EXPECT_EQ(e.stage(), "ingest");
  EXPECT_FALSE(std::filesystem::exists(out.path() / "a/caption.json"));
}

TEST(EndToEnd, ZeroDetections) {
  fixtures::TempDir out("pipeline");
  const auto run = fixtures::run_square(square_dir(), out.path() / "a", MockModelAdapter::Script{});
  EXPECT_TRUE(run.outcome.caption.instances.empty());
  EXPECT_NO_THROW(validate(run.outcome.caption));
  for (const auto& b : run.ledger) EXPECT_NE(b.operation, "describe_instance");
}

TEST(Batch, PartialFailureAndResume) {
  fixtures::TempDir out("pipeline");
  const auto base = square_dir().parent_path();
  const auto manifest = parse_manifest(
      "{\"id\":\"one\",\"path\":\"" + (base / "square").string() + "\",\"duration\":2}\n"
      "{\"id\":\"two\",\"path\":\"" + (base / "nope").string() + "\",\"duration\":2}\n"
      "{\"id\":\"three\",\"path\":\"" + (base / "square").string() + "\",\"duration\":2}\n");
  auto cfg = fixtures::square_config();
  cfg.jobs = 2;
  ImageDirectoryProvider provider;
  MockModelAdapter adapter(fixtures::square_adapter_script());
  MockChatBackend chat(MockChatBackend::script_from_json(PipelineContext::read_json(cfg.chat_script)));
  auto ctx = PipelineContext::with(cfg, provider, adapter, chat);

  const auto rep = batch_run(manifest, out.path(), *ctx);
  EXPECT_EQ(rep.ok, 2u);
  EXPECT_EQ(rep.failed, 1u);
  EXPECT_EQ(rep.records[1].status, "failed");
  EXPECT_NE(rep.records[1].reason.find("DecodeError"), std::string::npos) << rep.records[1].reason;
  EXPECT_TRUE(std::filesystem::exists(out.path() / "run_report.json"));
  // Crash isolation: the good records match a standalone run.
  fixtures::TempDir solo("pipeline");
  const auto alone = fixtures::run_square(square_dir(), solo.path() / "x");
  EXPECT_EQ(fixtures::snapshot(out.path() / "one"), alone.tree);
  EXPECT_EQ(fixtures::snapshot(out.path() / "three"), alone.tree);
  EXPECT_FALSE(std::filesystem::exists(out.path() / "two/caption.json"));

  const auto calls = chat.total_calls();
  const auto again = batch_run(manifest, out.path(), *ctx);
  EXPECT_EQ(again.skipped, 2u);
  EXPECT_EQ(again.failed, 1u);
  EXPECT_EQ(chat.total_calls(), calls);

  // A corrupted caption is recaptioned.
  std::ofstream(out.path() / "three/caption.json") << "{}";
  const auto third = batch_run(manifest, out.path(), *ctx);
  EXPECT_EQ(third.records[2].status, "ok");
  EXPECT_GT(chat.total_calls(), calls);
}

TEST(Batch, EmptyManifest) {
  fixtures::TempDir out("pipeline");
  auto cfg = fixtures::square_config();
  ImageDirectoryProvider provider;
  MockModelAdapter adapter;
  MockChatBackend chat;
  auto ctx = PipelineContext::with(cfg, provider, adapter, chat);
  const auto rep = batch_run(Manifest{}, out.path(), *ctx);
  EXPECT_EQ(rep.ok + rep.failed + rep.skipped, 0u);
  EXPECT_TRUE(rep.records.empty());
}

TEST(Context, MissingPackIsConfigError) {
  auto cfg = fixtures::square_config();
  cfg.prompts_dir = "/nonexistent";
  EXPECT_EQ(error_of([&] { PipelineContext::build(cfg); }).kind(), ErrorKind::ConfigError);
}
