#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "outfox/analysis.hpp"
#include "test_support.hpp"

using namespace outfox;

namespace {
std::vector<std::string> all_texts(const Corpus& c, const std::vector<AttackedEssay>& att) {
  std::vector<std::string> out;
  for (const auto& t : c.triplets()) {
    out.push_back(t.human_essay);
    out.push_back(t.lm_essay);
  }
  for (const auto& a : att) out.push_back(a.text);
  return out;
}
}  // namespace

TEST(Similarity, IdentityAndOrthogonality) {
  Corpus c({{"p0", "ps", "the same words here", "the same words here", "g"},
            {"p1", "ps", "apples oranges", "bicycles trains", "g"}});
  TfidfEmbedder emb(all_texts(c, {}));
  auto sims = pairwise_similarities(c, {}, {}, emb);
  ASSERT_EQ(sims.size(), 2u);
  EXPECT_NEAR(sims[0].similarity, 1.0, 1e-12);
  EXPECT_EQ(sims[1].similarity, 0.0);
}

TEST(Similarity, MatchesPerPairOracle) {
  Corpus c({{"a", "p", "cats sleep all day long", "cats often sleep during the day", "g"},
            {"b", "p", "homework is useless", "homework builds useful habits", "g"},
            {"c", "p", "parks are green", "city parks provide green space", "g"}});
  std::vector<AttackedEssay> att{{"a", "cats nap all day", "outfox", 5},
                                 {"b", "homework is mostly useless honestly", "outfox", 3},
                                 {"c", "parks green nice", "outfox", 3}};
  const auto texts = all_texts(c, att);
  TfidfEmbedder emb(texts);
  auto ref = oracle::dense_tfidf(texts);
  for (const auto& side : {SimilaritySide{}, SimilaritySide{"outfox"}}) {
    auto sims = pairwise_similarities(c, side, att, emb);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& t = c[i];
      const std::string& machine = side.attacker.empty() ? t.lm_essay : att[i].text;
      EXPECT_EQ(sims[i].problem_id, t.id);
      EXPECT_NEAR(sims[i].similarity,
                  oracle::dense_cos(ref.vectorize(t.human_essay), ref.vectorize(machine)), 1e-12);
    }
  }
}

TEST(Similarity, MissingAttackedIsDependencyError) {
  auto c = outfox::testing::toy_corpus(2);
  TfidfEmbedder emb(all_texts(c, {}));
  std::vector<AttackedEssay> att{{"p0", "x y", "outfox", 1}};
  EXPECT_THROW(pairwise_similarities(c, {"outfox"}, att, emb), DependencyError);
}

TEST(Similarity, OrderIndependentOverPermutations) {
  auto ts = outfox::testing::toy_triplets(12);
  Corpus c(ts);
  TfidfEmbedder emb(all_texts(c, {}));
  auto base = pairwise_similarities(c, {}, {}, emb);
  std::mt19937_64 rng(2);
  std::shuffle(ts.begin(), ts.end(), rng);
  auto shuffled = pairwise_similarities(Corpus(ts), {}, {}, emb);
  auto key = [](std::vector<ProblemSimilarity> v) {
    std::set<std::pair<std::string, double>> s;
    for (auto& x : v) s.emplace(x.problem_id, x.similarity);
    return s;
  };
  EXPECT_EQ(key(base), key(shuffled));
}

TEST(Summary, MeanMedian) {
  std::vector<double> v{0.2, 0.4, 0.6};
  auto s = distribution_summary(v, 4);
  EXPECT_NEAR(s.mean, 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(s.median, 0.4);
  EXPECT_EQ(delta_mean(s, s), 0.0);
  std::vector<double> even{1.0, 3.0, 2.0, 4.0};
  EXPECT_DOUBLE_EQ(distribution_summary(even).median, 2.5);
  EXPECT_THROW(distribution_summary(std::vector<double>{}), ArgumentError);
}

TEST(Summary, HistogramConservesCount) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(u(rng));
  v.push_back(1.0);
  v.push_back(0.0);
  auto s = distribution_summary(v, 10, std::pair{0.0, 1.0});
  std::size_t total = 0;
  for (const auto& b : s.histogram) total += b.count;
  EXPECT_EQ(total, v.size());
  EXPECT_EQ(s.histogram.front().left, 0.0);
  EXPECT_EQ(s.histogram.back().right, 1.0);
  auto constant = distribution_summary(std::vector<double>(5, 0.3), 3);
  EXPECT_EQ(constant.histogram[0].count, 5u);
}
