#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "instcap/metrics.hpp"

using namespace instcap;

TEST(VaeDistance, IdentityIsZero) {
  gen::Rng r(1);
  for (int i = 0; i < 20; ++i) {
    auto c = oracle::random_vae_case(r);
    EXPECT_EQ(vae_distance(c.a, c.a, c.w), 0.0);
  }
}

TEST(VaeDistance, AllOnesDifferenceIsEight) {
  LatentTensor ones({1, 2, 2, 2, 1}, 1.0f), zeros({1, 2, 2, 2, 1}, 0.0f);
  EXPECT_EQ(vae_distance(ones, zeros, LayerWeights::unit()), 8.0);
  EXPECT_EQ(oracle::vae_distance(ones, zeros, LayerWeights::unit()), 8.0);
  EXPECT_EQ(vae_distance_per_element(ones, zeros), 1.0);
}

TEST(VaeDistance, MatchesLoopOracle) {
  gen::Rng r(2);
  for (int i = 0; i < 100; ++i) {
    auto c = oracle::random_vae_case(r);
    EXPECT_LE(oracle::rel_err(vae_distance(c.a, c.b, c.w), oracle::vae_distance(c.a, c.b, c.w)), 1e-9) << i;
  }
}

TEST(VaeDistance, WeightHomogeneity) {
  gen::Rng r(3);
  for (int i = 0; i < 50; ++i) {
    auto c = oracle::random_vae_case(r);
    auto doubled = c.w;
    for (auto& l : doubled.layers)
      for (auto& v : l.values) v *= 2;
    EXPECT_LE(oracle::rel_err(vae_distance(c.a, c.b, doubled), 4 * vae_distance(c.a, c.b, c.w)), 1e-12);
  }
}

TEST(VaeDistance, SymmetricNonNegativeAndZeroOnlyWhenEqual) {
  gen::Rng r(4);
  for (int i = 0; i < 100; ++i) {
    auto c = oracle::random_vae_case(r);
    const double d = vae_distance(c.a, c.b, c.w);
    EXPECT_EQ(d, vae_distance(c.b, c.a, c.w));
    EXPECT_GT(d, 0.0);
    auto nearly = c.a;
    nearly.values[static_cast<size_t>(gen::uniform(r, 0, static_cast<int>(nearly.size()) - 1))] += 0.5f;
    EXPECT_GT(vae_distance(c.a, nearly, c.w), 0.0);
  }
}

TEST(VaeDistance, Errors) {
  LatentTensor a({1, 2, 2, 2, 1}), b({1, 2, 2, 2, 2}), rank4({1, 2, 2, 2});
  auto kind = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ContractError;
  };
  EXPECT_EQ(kind([&] { vae_distance(a, b); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind([&] { vae_distance(rank4, rank4); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind([&] { vae_distance(a, a, LayerWeights::unit(2)); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind([&] { vae_distance(a, a, LayerWeights{{WeightTensor{{3, 1, 1}, {1, 1, 1}}}}); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind([&] { vae_distance(a, a, LayerWeights::uniform(1, -1.0)); }), ErrorKind::PreconditionError);
}

TEST(VaeDistance, BroadcastWeightsSelectPositions) {
  LatentTensor a({1, 1, 2, 1, 1}), b({1, 1, 2, 1, 1});
  a.values = {3.0f, 5.0f};
  LayerWeights w{{WeightTensor{{2, 1, 1}, {0.0, 2.0}}}};
  EXPECT_EQ(vae_distance(a, b, w), 100.0);
}

TEST(SplitSentences, Examples) {
  EXPECT_EQ(split_sentences("A cat runs. It jumps!"), (std::vector<std::string>{"A cat runs.", "It jumps!"}));
  EXPECT_EQ(split_sentences("Mr. Smith walks."), (std::vector<std::string>{"Mr. Smith walks."}));
  EXPECT_TRUE(split_sentences("").empty());
  EXPECT_TRUE(split_sentences("   ").empty());
}

TEST(SplitSentences, LowercaseContinuationAndTrailingText) {
  EXPECT_EQ(split_sentences("It is 3.5 m tall. then it falls"), (std::vector<std::string>{"It is 3.5 m tall. then it falls"}));
  EXPECT_EQ(split_sentences("Wow?! A dog. Dr. Who e.g. Tom"),
            (std::vector<std::string>{"Wow?!", "A dog.", "Dr. Who e.g. Tom"}));
  EXPECT_EQ(split_sentences("She said \"Go.\" He went"), (std::vector<std::string>{"She said \"Go.\"", "He went"}));
}

TEST(SplitSentences, NoEmptySegmentsAndNothingLost) {
  gen::Rng r(6);
  const std::vector<std::string> parts{"A", "dog", "runs.", "It", "Mr.", "stops!", "why?", "Yes", "...", "e.g.", "End."};
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (int k = 0; k < gen::uniform(r, 0, 15); ++k) s += (k ? " " : "") + gen::pick(r, parts);
    auto out = split_sentences(s);
    std::string joined;
    for (const auto& seg : out) {
      EXPECT_FALSE(seg.empty());
      joined += (joined.empty() ? "" : " ") + seg;
    }
    EXPECT_EQ(joined, text::trim(s));
  }
}

TEST(SenBySen, Examples) {
  EXPECT_DOUBLE_EQ(clip_senbysen({{0.2, 0.2, 0.2}}), 0.2);
  EXPECT_DOUBLE_EQ(clip_senbysen({{0.1, 0.3}, {0.5, 0.7}}), 0.4);
}

TEST(SenBySen, ConstantMatrixGivesTheConstant) {
  gen::Rng r(9);
  for (int i = 0; i < 200; ++i) {
    auto m = oracle::random_similarity(r);
    const double c = gen::real(r, -1, 1);
    for (auto& row : m) std::fill(row.begin(), row.end(), c);
    ASSERT_EQ(clip_senbysen(m), c);
  }
}

TEST(SenBySen, OracleBoundsAndPermutation) {
  gen::Rng r(8);
  for (int i = 0; i < 100; ++i) {
    auto m = oracle::random_similarity(r);
    const double s = clip_senbysen(m);
    EXPECT_LE(oracle::rel_err(s, oracle::senbysen(m)), 1e-9);
    double lo = 1e9, hi = -1e9;
    for (const auto& row : m) {
      double mean = 0;
      for (double v : row) mean += v;
      mean /= row.size();
      lo = std::min(lo, mean);
      hi = std::max(hi, mean);
    }
    EXPECT_GE(s, lo - 1e-12);
    EXPECT_LE(s, hi + 1e-12);
    auto p = m;
    std::shuffle(p.begin(), p.end(), r);
    EXPECT_NEAR(clip_senbysen(p), s, 1e-12);
  }
}

TEST(SenBySen, Errors) {
  auto kind = [](const SimilarityMatrix& m) {
    try {
      clip_senbysen(m);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::ContractError;
  };
  EXPECT_EQ(kind({}), ErrorKind::EmptyInput);
  EXPECT_EQ(kind({{}}), ErrorKind::EmptyInput);
  EXPECT_EQ(kind({{0.1, 0.2}, {0.3}}), ErrorKind::ShapeMismatch);
}

TEST(SimilarityMatrix, MockEmbeddingsAreCosines) {
  MockModelAdapter adapter;
  FrameSequence frames;
  for (int i = 0; i < 3; ++i) frames.frames.push_back({i, Image(16, 16, static_cast<uint8_t>(40 * i + 10)), 0.0});
  auto m = similarity_matrix({"A red square.", "A blue sky."}, frames, adapter);
  ASSERT_EQ(m.size(), 2u);
  ASSERT_EQ(m[0].size(), 3u);
  for (const auto& row : m)
    for (double v : row) EXPECT_LE(std::abs(v), 1.0 + 1e-9);
  EXPECT_NEAR(cosine(adapter.embed_text("x y"), adapter.embed_text("x y")), 1.0, 1e-6);
}
