#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gen.hpp"
#include "instcap/caption_schema.hpp"

using namespace instcap;

namespace {

const char* kMinimal = R"({
  "global_summary": "A quiet street at dawn.",
  "background": "Empty road lined with trees.",
  "camera": {"basic_movement": "static", "qualitative": "steady", "shot_notes": null},
  "instances": [],
  "source_meta": null
})";

nlohmann::ordered_json person_doc() {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(kMinimal);
  j["instances"].push_back({{"id", "i0"},
                            {"class_name", "person"},
                            {"appearance", "A tall man in a grey suit."},
                            {"actions_motion", "He walks briskly toward the camera."},
                            {"position", "Center of the frame."},
                            {"bbox_track", {{0, 10, 20, 60, 120}, {4, 14, 22, 64, 122}}}});
  return j;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::ContractError;
}

StructuredCaption two_instances() {
  StructuredCaption c;
  c.global_summary = "Two dogs play in a park.";
  c.background = "Green lawn and oak trees.";
  c.camera = {CameraMotion::PanLeft, "slow", std::nullopt};
  c.instances.push_back({"i0", "dog", "FIRST-APPEARANCE brown terrier", "chases a ball", "left", std::nullopt});
  c.instances.push_back({"i1", "dog", "SECOND-APPEARANCE white poodle", "sits still", "right", std::nullopt});
  return c;
}

}  // namespace

TEST(ParseCaption, MinimalDocHasNoInstances) {
  auto c = parse_caption_text(kMinimal);
  EXPECT_TRUE(c.instances.empty());
  EXPECT_EQ(c.camera.basic_movement, CameraMotion::Static);
  EXPECT_FALSE(c.camera.shot_notes.has_value());
  EXPECT_FALSE(c.source_meta.has_value());
}

TEST(ParseCaption, PersonInstanceFieldsMatch) {
  auto c = parse_caption(person_doc());
  ASSERT_EQ(c.instances.size(), 1u);
  const auto& d = c.instances[0];
  EXPECT_EQ(d.id, "i0");
  EXPECT_EQ(d.class_name, "person");
  EXPECT_EQ(d.appearance, "A tall man in a grey suit.");
  EXPECT_EQ(d.actions_motion, "He walks briskly toward the camera.");
  EXPECT_EQ(d.position, "Center of the frame.");
  ASSERT_TRUE(d.bbox_track.has_value());
  ASSERT_EQ(d.bbox_track->size(), 2u);
  EXPECT_EQ((*d.bbox_track)[1].frame_index, 4);
  EXPECT_EQ((*d.bbox_track)[1].box, (Box{14, 22, 64, 122}));
}

TEST(ParseCaption, DuplicateIdIsSchemaViolation) {
  auto j = person_doc();
  j["instances"].push_back(j["instances"][0]);
  EXPECT_EQ(kind_of([&] { parse_caption(j); }), ErrorKind::SchemaViolation);
}

TEST(ParseCaption, MissingFieldsAndBadLabels) {
  for (const char* key : {"global_summary", "background", "camera", "instances"}) {
    auto j = person_doc();
    j.erase(key);
    EXPECT_EQ(kind_of([&] { parse_caption(j); }), ErrorKind::SchemaViolation) << key;
  }
  for (const char* key : {"id", "class_name", "appearance", "actions_motion", "position"}) {
    auto j = person_doc();
    j["instances"][0].erase(key);
    EXPECT_EQ(kind_of([&] { parse_caption(j); }), ErrorKind::SchemaViolation) << key;
  }
  auto j = person_doc();
  j["camera"]["basic_movement"] = "dolly_zoom";
  EXPECT_EQ(kind_of([&] { parse_caption(j); }), ErrorKind::SchemaViolation);
  j = person_doc();
  j["instances"][0]["class_name"] = "  ";
  EXPECT_EQ(kind_of([&] { parse_caption(j); }), ErrorKind::SchemaViolation);
  j = person_doc();
  j["extra"] = 1;
  EXPECT_EQ(kind_of([&] { parse_caption(j); }), ErrorKind::SchemaViolation);
  EXPECT_EQ(kind_of([&] { parse_caption_text("{not json"); }), ErrorKind::SchemaViolation);
}

TEST(ParseCaption, EmptyPositionAllowed) {
  auto j = person_doc();
  j["instances"][0]["position"] = "";
  EXPECT_EQ(parse_caption(j).instances[0].position, "");
}

TEST(ParseCaption, WordLimit) {
  auto j = person_doc();
  j["global_summary"] = "one two three four five six seven eight nine ten eleven twelve thirteen fourteen fifteen "
                        "sixteen seventeen eighteen nineteen twenty";
  EXPECT_NO_THROW(parse_caption(j));
  j["global_summary"] = j["global_summary"].get<std::string>() + " twentyone";
  EXPECT_EQ(kind_of([&] { parse_caption(j); }), ErrorKind::WordLimitViolation);
}

TEST(RenderCaption, StructuredKeepsFieldOrder) {
  auto out = render_caption(parse_caption(person_doc()), RenderStyle::Structured);
  auto pos = [&](const char* k) { return out.find(std::string("\"") + k + "\""); };
  EXPECT_LT(pos("global_summary"), pos("background"));
  EXPECT_LT(pos("background"), pos("camera"));
  EXPECT_LT(pos("camera"), pos("instances"));
  EXPECT_LT(pos("instances"), pos("source_meta"));
  EXPECT_LT(pos("id"), pos("class_name"));
  EXPECT_LT(pos("actions_motion"), pos("position"));
  EXPECT_LT(pos("position"), pos("bbox_track"));
  EXPECT_EQ(out.back(), '\n');
}

TEST(RenderCaption, CanonicalDocumentIsFixedPoint) {
  auto once = render_caption(parse_caption(person_doc()), RenderStyle::Structured);
  auto twice = render_caption(parse_caption_text(once), RenderStyle::Structured);
  EXPECT_EQ(once, twice);
}

TEST(RenderCaption, FlatEmptyInstancesHasThreeParts) {
  auto c = parse_caption_text(kMinimal);
  auto flat = render_caption(c, RenderStyle::FlatTrainingText);
  EXPECT_EQ(flat, "A quiet street at dawn. Camera: static, steady. Background: Empty road lined with trees.");
}

TEST(RenderCaption, FlatOrderFollowsInstanceList) {
  auto c = two_instances();
  auto flat = render_caption(c, RenderStyle::FlatTrainingText);
  const auto g = flat.find("Two dogs"), cam = flat.find("Camera: pan left"), bg = flat.find("Background:"),
             a0 = flat.find("FIRST-APPEARANCE"), a1 = flat.find("SECOND-APPEARANCE");
  ASSERT_NE(a0, std::string::npos);
  ASSERT_NE(a1, std::string::npos);
  EXPECT_LT(g, cam);
  EXPECT_LT(cam, bg);
  EXPECT_LT(bg, a0);
  EXPECT_LT(a0, a1);
  std::swap(c.instances[0], c.instances[1]);
  flat = render_caption(c, RenderStyle::FlatTrainingText);
  EXPECT_GT(flat.find("FIRST-APPEARANCE"), flat.find("SECOND-APPEARANCE"));
}

TEST(CaptionProperty, StructuredRoundTrip) {
  gen::Rng r(20241019);
  for (int i = 0; i < 1000; ++i) {
    auto c = gen::caption(r);
    ASSERT_NO_THROW(validate(c)) << i;
    auto doc = render_caption(c, RenderStyle::Structured);
    auto back = parse_caption_text(doc);
    ASSERT_EQ(back, c) << doc;
    EXPECT_LE(text::word_count(back.global_summary), kGlobalSummaryWordLimit);
  }
}

TEST(CaptionProperty, FlatRenderIsDeterministic) {
  gen::Rng r(5);
  for (int i = 0; i < 200; ++i) {
    auto c = gen::caption(r);
    EXPECT_EQ(render_caption(c, RenderStyle::FlatTrainingText), render_caption(c, RenderStyle::FlatTrainingText));
  }
}

TEST(ClassHints, ShippedPackHasPrintedHints) {
  auto reg = ClassHintRegistry::load(fixtures::source_dir() / "data/class_hints.json");
  EXPECT_EQ(reg.size(), 20u);
  EXPECT_NE(lookup_hint(reg, "person").find("facial expressions, attire, age, gender"), std::string::npos);
  EXPECT_NE(lookup_hint(reg, "car").find("color, make, model"), std::string::npos);
  EXPECT_EQ(lookup_hint(reg, "zebra"), ClassHintRegistry::kDefaultHint);
  EXPECT_EQ(lookup_hint(reg, "  Person "), lookup_hint(reg, "person"));
}

TEST(ClassHints, LookupIsTotal) {
  auto reg = ClassHintRegistry::load(fixtures::source_dir() / "data/class_hints.json");
  gen::Rng r(99);
  for (int i = 0; i < 1000; ++i) {
    auto name = i % 2 ? gen::noise_string(r, 24) : gen::ascii_string(r, 24);
    EXPECT_FALSE(text::trim(lookup_hint(reg, name)).empty());
  }
}

TEST(ClassHints, BadPackIsConfigError) {
  fixtures::TempDir tmp("hints");
  std::ofstream(tmp / "h.json") << R"({"dog": 3})";
  EXPECT_EQ(kind_of([&] { ClassHintRegistry::load(tmp / "h.json"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kind_of([&] { ClassHintRegistry::load(tmp / "missing.json"); }), ErrorKind::ConfigError);
}

TEST(Lexicon, ShippedListsAreDisjointLowercaseUnique) {
  auto lex = Lexicon::load(fixtures::source_dir() / "data/lexicon");
  EXPECT_FALSE(lex.positive.empty());
  EXPECT_FALSE(lex.negative.empty());
  std::set<std::string> pos(lex.positive.begin(), lex.positive.end());
  std::set<std::string> neg(lex.negative.begin(), lex.negative.end());
  EXPECT_EQ(pos.size(), lex.positive.size());
  EXPECT_EQ(neg.size(), lex.negative.size());
  for (const auto& w : lex.positive) EXPECT_EQ(w, text::to_lower(w));
  for (const auto& w : lex.negative) {
    EXPECT_EQ(w, text::to_lower(w));
    EXPECT_EQ(pos.count(w), 0u) << w;
  }
}

TEST(Lexicon, OverlapIsRejectedAndDuplicatesCollapse) {
  fixtures::TempDir tmp("lex");
  std::ofstream(tmp / "positive.txt") << "Vivid\nvivid\n# comment\n\ncrisp\n";
  std::ofstream(tmp / "negative.txt") << "blurry\n";
  auto lex = Lexicon::load(tmp.path());
  EXPECT_EQ(lex.positive, (std::vector<std::string>{"vivid", "crisp"}));
  std::ofstream(tmp / "negative.txt") << "CRISP\n";
  EXPECT_EQ(kind_of([&] { Lexicon::load(tmp.path()); }), ErrorKind::SchemaViolation);
}
