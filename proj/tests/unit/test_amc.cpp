#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "instcap/amc.hpp"

using namespace instcap;
using fixtures::MovingSquare;

namespace {

FrameSequence square_frames() {
  InMemoryProvider p;
  std::vector<Image> frames;
  for (int t = 0; t < MovingSquare::kFrames; ++t) frames.push_back(MovingSquare::frame(t));
  p.add("square", frames, MovingSquare::kFps);
  return sample_frames(p, "square");
}

MockModelAdapter::Script square_script() {
  return MockModelAdapter::script_from_json(
      nlohmann::json::parse(fixtures::read_file(fixtures::source_dir() / "tests/fixtures/moving_square/adapter_script.json")));
}

class ThrowingAdapter : public MockModelAdapter {
 public:
  std::vector<Detection> detect(const Image&) override { throw std::runtime_error("connection reset"); }
};

class BadTrackAdapter : public MockModelAdapter {
 public:
  using MockModelAdapter::MockModelAdapter;
  std::vector<MaskTrack> segment(const FrameSequence& f, const std::vector<Box>& s) override {
    auto t = MockModelAdapter::segment(f, s);
    t.front().masks.pop_back();
    t.front().boxes.pop_back();
    return t;
  }
};

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::ContractError;
}

}  // namespace

TEST(Amc, ZeroDetectionsStillLabelsCamera) {
  MockModelAdapter adapter;
  auto r = run_amc(square_frames(), adapter);
  EXPECT_TRUE(r.assets.empty());
  EXPECT_EQ(r.camera.motion, CameraMotion::PanLeft);
  EXPECT_NEAR(r.camera.magnitude, 2.0, 0.6);
  EXPECT_EQ(adapter.calls().count("segment"), 0u);
}

TEST(Amc, FullFrameMaskKeepsOriginals) {
  auto frames = square_frames();
  MockModelAdapter adapter({{{"scene", 0.9, Box{0, 0, frames.width(), frames.height()}}}, {}});
  auto r = run_amc(frames, adapter);
  ASSERT_EQ(r.assets.size(), 1u);
  ASSERT_EQ(r.assets[0].blurred_clip.size(), frames.size());
  for (size_t i = 0; i < frames.size(); ++i) EXPECT_EQ(r.assets[0].blurred_clip.frames[i], frames.frames[i]);
}

TEST(Amc, MovingSquareMatchesPerFrameOracle) {
  auto frames = square_frames();
  MockModelAdapter adapter(square_script());
  auto r = run_amc(frames, adapter);
  ASSERT_EQ(r.assets.size(), 1u);
  const auto& a = r.assets[0];
  EXPECT_EQ(a.instance_id, "i0");
  EXPECT_EQ(a.class_name, "square");
  EXPECT_EQ(a.blurred_clip.source_id, "instance_i0");
  ASSERT_EQ(a.track.masks.size(), frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames.frames[i];
    const auto box = MovingSquare::square_box(f.index);
    auto mask = Mask::from_box(frames.width(), frames.height(), box);
    EXPECT_EQ(a.track.masks[i], mask);
    EXPECT_EQ(a.track.boxes[i], box);
    EXPECT_EQ(a.blurred_clip.frames[i].image, blur_composite(f.image, mask, kDefaultBlurSigma));
    EXPECT_EQ(a.blurred_clip.frames[i].index, f.index);
    // Square pixels are sharp; a background pixel far from it changed.
    EXPECT_EQ(a.blurred_clip.frames[i].image.at(box.x0 + 3, box.y0 + 3)[0], 230);
    EXPECT_NE(a.blurred_clip.frames[i].image.pixels, f.image.pixels);
  }
  EXPECT_EQ(r.camera.motion, CameraMotion::PanLeft);
}

TEST(Amc, OrderingThresholdAndCap) {
  auto frames = square_frames();
  MockModelAdapter::Script s;
  const double conf[] = {0.55, 0.95, 0.2, 0.7, 0.8, 0.6, 0.99, 0.65, 0.5};
  for (int i = 0; i < 9; ++i) s.detections.push_back({"obj" + std::to_string(i), conf[i], Box{i * 10, 0, i * 10 + 8, 8}});
  MockModelAdapter adapter(s);
  AmcConfig cfg;
  auto r = run_amc(frames, adapter, cfg);
  ASSERT_EQ(r.assets.size(), 6u);
  const std::vector<std::string> want{"obj6", "obj1", "obj4", "obj3", "obj7", "obj5"};
  for (size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(r.assets[i].class_name, want[i]);
    EXPECT_EQ(r.assets[i].instance_id, "i" + std::to_string(i));
    if (i) {
      EXPECT_GE(r.assets[i - 1].confidence, r.assets[i].confidence);
    }
  }
  cfg.max_instances = 2;
  EXPECT_EQ(run_amc(frames, adapter, cfg).assets.size(), 2u);
  cfg.max_instances = 6;
  cfg.confidence_threshold = 0.9;
  EXPECT_EQ(run_amc(frames, adapter, cfg).assets.size(), 2u);
  cfg.confidence_threshold = 0.5;
  cfg.max_instances = 100;
  EXPECT_EQ(run_amc(frames, adapter, cfg).assets.size(), 8u);
}

TEST(Amc, VisualPromptModes) {
  auto frames = square_frames();
  MockModelAdapter adapter(square_script());
  AmcConfig cfg;
  cfg.visual_prompt = VisualPrompt::RedScreen;
  auto r = run_amc(frames, adapter, cfg);
  EXPECT_EQ(r.assets[0].blurred_clip.frames[0].image.at(0, 0)[0], 255);
  EXPECT_EQ(r.assets[0].blurred_clip.frames[0].image.at(0, 0)[1], 0);
  cfg.visual_prompt = VisualPrompt::BboxOverlay;
  r = run_amc(frames, adapter, cfg);
  EXPECT_EQ(r.assets[0].blurred_clip.frames[0].image.at(0, 0)[1], frames.frames[0].image.at(0, 0)[1]);
}

TEST(Amc, AdapterFlowSource) {
  MockModelAdapter adapter;
  AmcConfig cfg;
  cfg.flow_source = FlowSource::Adapter;
  auto r = run_amc(square_frames(), adapter, cfg);
  EXPECT_EQ(r.camera.motion, CameraMotion::PanLeft);
  EXPECT_EQ(adapter.calls().at("flow"), 7);
}

TEST(Amc, Errors) {
  MockModelAdapter adapter;
  EXPECT_EQ(kind_of([&] { run_amc(FrameSequence{}, adapter); }), ErrorKind::NoFrames);
  ThrowingAdapter broken;
  EXPECT_EQ(kind_of([&] { run_amc(square_frames(), broken); }), ErrorKind::AdapterError);
  BadTrackAdapter short_track(square_script());
  EXPECT_EQ(kind_of([&] { run_amc(square_frames(), short_track); }), ErrorKind::AdapterError);

  class BadConfidence : public MockModelAdapter {
   public:
    std::vector<Detection> detect(const Image&) override { return {{"x", 1.5, Box{0, 0, 4, 4}}}; }
  } bad_conf;
  EXPECT_EQ(kind_of([&] { run_amc(square_frames(), bad_conf); }), ErrorKind::AdapterError);
}

TEST(Amc, SingleFrameHasUnknownCamera) {
  auto frames = square_frames();
  frames.frames.resize(1);
  MockModelAdapter adapter(square_script());
  auto r = run_amc(frames, adapter);
  EXPECT_EQ(r.camera.motion, CameraMotion::Unknown);
  EXPECT_EQ(r.assets.size(), 1u);
}

TEST(Amc, ArtifactsWritten) {
  fixtures::TempDir tmp("amc");
  MockModelAdapter adapter(square_script());
  AmcConfig cfg;
  auto r = run_amc(square_frames(), adapter, cfg);
  write_amc_artifacts(tmp.path(), r, cfg);
  EXPECT_TRUE(std::filesystem::exists(tmp / "instance_i0/000015.png"));
  auto j = nlohmann::json::parse(fixtures::read_file(tmp / "amc_result.json"));
  EXPECT_EQ(j["camera"]["label"], "pan_left");
  EXPECT_EQ(j["instances"].size(), 1u);
  EXPECT_EQ(j["detections"].size(), 2u);
  EXPECT_EQ(png::read(tmp / "instance_i0/000009.png"), r.assets[0].blurred_clip.frames[4].image);
}
