#pragma once

// Similarity of machine-side essays to their paired human essays, and
// summaries of the resulting distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "outfox/corpus.hpp"
#include "outfox/error.hpp"
#include "outfox/retrieval.hpp"

namespace outfox {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
};

// Dense L2-normalized TF-IDF vectors over a fitted vocabulary. No pooling
// involved: the document vector is the embedding.
class TfidfEmbedder final : public Embedder {
 public:
  explicit TfidfEmbedder(const std::vector<std::string>& fit_texts) : model_(fit_tfidf(fit_texts)) {}

  std::vector<double> embed(std::string_view text) const override {
    std::vector<double> v(model_.dimension(), 0.0);
    for (const auto& e : model_.transform(text).entries) v[e.index] = e.weight;
    return v;
  }
  std::size_t dimension() const override { return model_.dimension(); }

 private:
  TfidfModel model_;
};

inline double dense_cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("embedding dimensions differ");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

// Machine side: empty tag = stored machine essays, otherwise that attacker's essays.
struct SimilaritySide {
  std::string attacker;
  std::string name() const { return attacker.empty() ? "lm" : "attacked:" + attacker; }
};

struct ProblemSimilarity {
  std::string problem_id;
  double similarity = 0.0;
  bool operator==(const ProblemSimilarity&) const = default;
};

// Cosine similarity between each problem's human essay and its machine-side essay.
inline std::vector<ProblemSimilarity> pairwise_similarities(const Corpus& corpus,
                                                            const SimilaritySide& side,
                                                            std::span<const AttackedEssay> attacked,
                                                            const Embedder& embedder) {
  std::unordered_map<std::string, const AttackedEssay*> by_problem;
  for (const auto& a : attacked)
    if (a.attacker == side.attacker) by_problem.insert_or_assign(a.problem_id, &a);
  std::vector<ProblemSimilarity> out;
  out.reserve(corpus.size());
  for (const auto& t : corpus.triplets()) {
    const std::string* machine = &t.lm_essay;
    if (!side.attacker.empty()) {
      auto it = by_problem.find(t.id);
      if (it == by_problem.end())
        throw DependencyError("no '" + side.attacker + "' attacked essay for problem '" + t.id + "'");
      machine = &it->second->text;
    }
    out.push_back({t.id, dense_cosine(embedder.embed(t.human_essay), embedder.embed(*machine))});
  }
  return out;
}

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

struct DistributionSummary {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
  std::vector<HistogramBin> histogram;
};

// Equal-width bins over [lo, hi] (default: the sample range). The last bin
// is closed on the right; values outside the range clamp to the edge bins.
inline DistributionSummary distribution_summary(std::span<const double> values, std::size_t bins = 10,
                                                std::optional<std::pair<double, double>> range = {}) {
  if (values.empty()) throw ArgumentError("distribution_summary: empty input");
  if (bins == 0) throw ArgumentError("distribution_summary: bins must be positive");
  DistributionSummary s;
  s.n = values.size();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  s.median = s.n % 2 ? sorted[s.n / 2] : (sorted[s.n / 2 - 1] + sorted[s.n / 2]) / 2.0;
  s.min = sorted.front();
  s.max = sorted.back();

  const double lo = range ? range->first : s.min;
  const double hi = range ? range->second : s.max;
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 0.0;
  s.histogram.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    s.histogram[b].left = lo + width * static_cast<double>(b);
    s.histogram[b].right = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : sorted) {
    std::size_t b = 0;
    if (width > 0.0) {
      const double pos = std::floor((v - lo) / width);
      b = pos <= 0.0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
    }
    ++s.histogram[b].count;
  }
  return s;
}

// Shift of the attacked distribution relative to the non-attacked one.
inline double delta_mean(const DistributionSummary& attacked, const DistributionSummary& non_attacked) {
  return attacked.mean - non_attacked.mean;
}

inline std::vector<double> similarity_values(std::span<const ProblemSimilarity> sims) {
  std::vector<double> out;
  out.reserve(sims.size());
  for (const auto& s : sims) out.push_back(s.similarity);
  return out;
}

}  // namespace outfox
