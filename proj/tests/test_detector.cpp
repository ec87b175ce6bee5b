#include <gtest/gtest.h>

#include <random>

#include "outfox/detector.hpp"
#include "test_support.hpp"

using namespace outfox;

namespace {

AttackedPool pool_for(const Corpus& c) {
  AttackedPool pool;
  for (const auto& t : c.triplets())
    pool.emplace(t.id, AttackedEssay{t.id, "ATTACKED " + t.id, "outfox",
                                     static_cast<std::int64_t>(word_count(t.human_essay))});
  return pool;
}

struct Composition {
  std::size_t human = 0, lm = 0, attacked = 0;
};

Composition compose(const DetectorContext& ctx) {
  Composition c;
  for (const auto& e : ctx.examples) {
    if (e.label == Label::Human) ++c.human;
    if (e.label == Label::LM) ++c.lm;
    if (e.attacked) {
      ++c.attacked;
      EXPECT_EQ(e.label, Label::LM);
    }
  }
  return c;
}

}  // namespace

TEST(DetectorContext, NoAttackIsFiveAndFive) {
  auto train = outfox::testing::toy_corpus(30);
  auto tfidf = fit_tfidf(train.problem_statements());
  DetectorConfig cfg{5, 0, 1};
  auto ctx = build_detector_context(train, tfidf, "students and video games", cfg, {});
  ASSERT_EQ(ctx.examples.size(), 10u);
  auto c = compose(ctx);
  EXPECT_EQ(c.human, 5u);
  EXPECT_EQ(c.lm, 5u);
  EXPECT_EQ(c.attacked, 0u);
}

TEST(DetectorContext, AttackAwareIsFiveThreeTwo) {
  auto train = outfox::testing::toy_corpus(30);
  auto tfidf = fit_tfidf(train.problem_statements());
  auto ctx = build_detector_context(train, tfidf, "city parks", DetectorConfig{5, 3, 2}, pool_for(train));
  ASSERT_EQ(ctx.examples.size(), 10u);
  auto c = compose(ctx);
  EXPECT_EQ(c.human, 5u);
  EXPECT_EQ(c.lm, 5u);
  EXPECT_EQ(c.attacked, 3u);
  for (const auto& e : ctx.examples)
    if (e.attacked) EXPECT_EQ(e.essay, "ATTACKED " + e.problem_id);
}

TEST(DetectorContext, MinimalCase) {
  auto train = outfox::testing::toy_corpus(3);
  auto tfidf = fit_tfidf(train.problem_statements());
  auto ctx = build_detector_context(train, tfidf, "x", DetectorConfig{1, 1, 0}, pool_for(train));
  auto c = compose(ctx);
  EXPECT_EQ(c.human, 1u);
  EXPECT_EQ(c.attacked, 1u);
}

TEST(DetectorContext, CardinalityProperty) {
  auto train = outfox::testing::toy_corpus(25);
  auto tfidf = fit_tfidf(train.problem_statements());
  auto pool = pool_for(train);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng() % 10;
    const std::size_t j = rng() % (k + 1);
    DetectorConfig cfg{k, j, static_cast<std::int64_t>(rng()), rng() % 2 == 0};
    auto ctx = build_detector_context(train, tfidf, outfox::testing::topics()[rng() % 15], cfg, pool);
    ASSERT_EQ(ctx.examples.size(), 2 * k);
    auto c = compose(ctx);
    EXPECT_EQ(c.human, k);
    EXPECT_EQ(c.lm, k);
    EXPECT_EQ(c.attacked, j);
  }
}

TEST(DetectorContext, InterleavedByRankWithoutShuffle) {
  auto train = outfox::testing::toy_corpus(20);
  auto tfidf = fit_tfidf(train.problem_statements());
  DetectorConfig cfg{4, 0, 0, false};
  auto ctx = build_detector_context(train, tfidf, "space travel", cfg, {});
  auto hits = top_k_closest(tfidf, "space travel", 4);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(ctx.examples[2 * r].label, Label::Human);
    EXPECT_EQ(ctx.examples[2 * r].problem_id, train[hits[r]].id);
    EXPECT_EQ(ctx.examples[2 * r + 1].label, Label::LM);
    EXPECT_EQ(ctx.examples[2 * r + 1].essay, train[hits[r]].lm_essay);
  }
}

TEST(DetectorContext, SeedDeterminism) {
  auto train = outfox::testing::toy_corpus(20);
  auto tfidf = fit_tfidf(train.problem_statements());
  auto pool = pool_for(train);
  DetectorConfig cfg{5, 3, 99, true};
  auto a = build_detector_context(train, tfidf, "homework", cfg, pool);
  auto b = build_detector_context(train, tfidf, "homework", cfg, pool);
  EXPECT_EQ(a.examples, b.examples);
  bool differs = false;
  for (std::int64_t s = 0; s < 20 && !differs; ++s) {
    cfg.seed = s;
    differs = build_detector_context(train, tfidf, "homework", cfg, pool).examples != a.examples;
  }
  EXPECT_TRUE(differs);
}

TEST(DetectorContext, Errors) {
  auto train = outfox::testing::toy_corpus(4);
  auto tfidf = fit_tfidf(train.problem_statements());
  EXPECT_THROW(build_detector_context(train, tfidf, "x", DetectorConfig{5, 0, 0}, {}), SizeError);
  try {
    build_detector_context(train, tfidf, "x", DetectorConfig{2, 2, 0}, {});
    FAIL();
  } catch (const DependencyError& e) {
    EXPECT_NE(std::string(e.what()).find("'p"), std::string::npos);
  }
  EXPECT_THROW(build_detector_context(train, tfidf, "x", DetectorConfig{2, 3, 0}, {}), ArgumentError);
  const std::vector<std::string> ex{"p0"};
  EXPECT_THROW(build_detector_context(train, tfidf, "x", DetectorConfig{4, 0, 0}, {}, ex), SizeError);
}

TEST(DetectorContext, ExcludedProblemNeverAppears) {
  auto train = outfox::testing::toy_corpus(20);
  auto tfidf = fit_tfidf(train.problem_statements());
  const std::vector<std::string> ex{"p3"};
  auto ctx = build_detector_context(train, tfidf, train[3].problem_statement, DetectorConfig{5, 0, 0}, {}, ex);
  for (const auto& e : ctx.examples) EXPECT_NE(e.problem_id, "p3");
}

TEST(DetectorContext, OnDemandAttack) {
  auto train = outfox::testing::toy_corpus(10);
  auto tfidf = fit_tfidf(train.problem_statements());
  int calls = 0;
  AttackOnDemand gen = [&](const EssayTriplet& t) {
    ++calls;
    return AttackedEssay{t.id, "fresh", "outfox", 1};
  };
  auto ctx = build_detector_context(train, tfidf, "x", DetectorConfig{3, 2, 0}, {}, {}, gen);
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(compose(ctx).attacked, 2u);
}

TEST(Detect, ParsesScriptedAnswers) {
  DetectorContext ctx;
  ctx.examples = {{"h", Label::Human}, {"m", Label::LM}};
  MockBackend human({}, "Human");
  EXPECT_EQ(detect(human, ctx, "essay"), Label::Human);
  MockBackend lm({}, "It is generated by a Language Model");
  EXPECT_EQ(detect(lm, ctx, "essay"), Label::LM);
  MockBackend maybe({}, "maybe");
  RecordingBackend rec(maybe);
  EXPECT_THROW(detect(rec, ctx, "essay"), UnparseableLabelError);
  EXPECT_EQ(rec.calls(), 2u);
}

TEST(Detect, UsesGreedyParams) {
  struct Spy : CompletionBackend {
    GenerationParams seen;
    std::string complete(std::string_view, const GenerationParams& p) override {
      seen = p;
      return "LM";
    }
    std::string name() const override { return "spy"; }
  } spy;
  DetectorContext ctx;
  detect(spy, ctx, "e");
  EXPECT_EQ(spy.seen.temperature, 0.0);
  EXPECT_EQ(spy.seen.top_p, 0.0);
}

TEST(Detect, LabelScoreArgmax) {
  struct Scores : LabelScoringBackend {
    double human, lm;
    Scores(double h, double l) : human(h), lm(l) {}
    double continuation_log_prob(std::string_view, std::string_view c) override {
      return c == "Human" ? human : lm;
    }
  };
  DetectorContext ctx;
  Scores a(-1.0, -2.0), b(-3.0, -0.5);
  EXPECT_EQ(detect_by_label_scores(a, ctx, "e"), Label::Human);
  EXPECT_EQ(detect_by_label_scores(b, ctx, "e"), Label::LM);
}

TEST(OutfoxDetector, PredictAndConfigHash) {
  MockBackend m({{MatchKind::Contains, "Text: target-lm. Answer: ", "LM"}}, "Human");
  OutfoxDetector det(outfox::testing::toy_corpus(12), DetectorConfig{5, 0, 0}, m);
  EXPECT_EQ(det.predict("video games", "target-lm"), Label::LM);
  EXPECT_EQ(det.predict("video games", "target-h"), Label::Human);
  auto other = det.with_config(DetectorConfig{5, 0, 1});
  EXPECT_NE(det.config_hash(), other.config_hash());
  EXPECT_EQ(det.config_hash(), det.with_config(DetectorConfig{5, 0, 0}).config_hash());
}

TEST(DetectionRecords, RoundTrip) {
  std::vector<DetectionRecord> recs{{"p1:human", Label::Human, Label::LM, 5, 3, 7},
                                    {"p1:lm", Label::LM, Label::LM, 5, 3, 7}};
  auto dir = outfox::testing::temp_dir("detections");
  save_detections((dir / "d.jsonl").string(), recs);
  EXPECT_EQ(load_detections((dir / "d.jsonl").string()), recs);
  EXPECT_EQ(to_json(recs[0]).dump(),
            R"({"essay_id":"p1:human","gold_label":"Human","pred_label":"LM","k":5,"j":3,"seed":7})");
}
