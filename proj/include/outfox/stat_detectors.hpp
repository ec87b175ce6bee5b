#pragma once

// Zero-shot statistical detectors over any ScoringBackend. Every method
// reports through a common orientation where higher means more machine-like:
// rank, log-rank, and entropy are negated internally.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "outfox/backend.hpp"
#include "outfox/corpus.hpp"
#include "outfox/error.hpp"
#include "outfox/ngram.hpp"
#include "outfox/random.hpp"

namespace outfox {

enum class StatMethod { LogProb, Rank, LogRank, Entropy, DetectGpt };

inline std::string_view to_string(StatMethod m) {
  switch (m) {
    case StatMethod::LogProb: return "log_prob";
    case StatMethod::Rank: return "rank";
    case StatMethod::LogRank: return "log_rank";
    case StatMethod::Entropy: return "entropy";
    case StatMethod::DetectGpt: return "detectgpt";
  }
  return "log_prob";
}

inline StatMethod stat_method_from_string(std::string_view s) {
  for (auto m : {StatMethod::LogProb, StatMethod::Rank, StatMethod::LogRank, StatMethod::Entropy,
                 StatMethod::DetectGpt})
    if (to_string(m) == s) return m;
  throw ArgumentError("unknown statistical method '" + std::string(s) + "'");
}

struct DetectorScore {
  std::string essay_id;
  StatMethod method = StatMethod::LogProb;
  double score = 0.0;
  bool higher_means_machine = true;
};

namespace detail {
template <typename Fn>
double mean_over_tokens(const ScoringBackend& lm, std::string_view text, Fn&& per_token) {
  const auto scores = lm.score_tokens(text);
  if (scores.empty()) throw ArgumentError("cannot score text with no tokens");
  double s = 0.0;
  for (const auto& t : scores) s += per_token(t);
  return s / static_cast<double>(scores.size());
}
}  // namespace detail

// Mean per-token log probability. Higher => machine-like.
inline double score_log_prob(const ScoringBackend& lm, std::string_view text) {
  return detail::mean_over_tokens(lm, text, [](const TokenScore& t) { return t.log_prob; });
}

// Mean 1-based token rank. Lower => machine-like (raw, not negated).
inline double score_rank(const ScoringBackend& lm, std::string_view text) {
  return detail::mean_over_tokens(lm, text,
                                  [](const TokenScore& t) { return static_cast<double>(t.rank); });
}

inline double score_log_rank(const ScoringBackend& lm, std::string_view text) {
  return detail::mean_over_tokens(
      lm, text, [](const TokenScore& t) { return std::log(static_cast<double>(t.rank)); });
}

// Mean predictive entropy in nats. Lower => machine-like (raw).
inline double score_entropy(const ScoringBackend& lm, std::string_view text) {
  return detail::mean_over_tokens(lm, text, [](const TokenScore& t) { return t.entropy; });
}

// Replacement source for perturbation: given a token position, draw a token.
using Lexicon = std::function<std::string(std::size_t position, Rng& rng)>;

// Samples from the model's training unigram distribution.
inline Lexicon unigram_lexicon(const NgramLm& lm) {
  std::vector<std::string> tokens;
  std::vector<double> cdf;
  double total = 0.0;
  for (const auto& [tok, c] : lm.unigram_counts()) {
    tokens.push_back(tok);
    total += static_cast<double>(c);
    cdf.push_back(total);
  }
  if (tokens.empty()) throw ArgumentError("unigram lexicon: model has no training words");
  return [tokens = std::move(tokens), cdf = std::move(cdf), total](std::size_t, Rng& rng) {
    const double u = uniform_unit(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return tokens[static_cast<std::size_t>(it - cdf.begin())];
  };
}

inline std::size_t perturbation_count(std::size_t tokens, double mask_fraction) {
  if (tokens == 0) return 0;
  const double raw = mask_fraction * static_cast<double>(tokens);
  auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(n, 1, tokens);
}

// Replaces ceil(mask_fraction * tokens) distinct positions with lexicon draws.
// Output tokens are joined by single spaces.
inline std::string perturb(std::string_view text, double mask_fraction, std::int64_t seed,
                           const Lexicon& lexicon) {
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0))
    throw ArgumentError("mask_fraction must lie in (0, 1)");
  auto tokens = split_words(text);
  if (tokens.empty()) return std::string(text);
  Rng rng(static_cast<std::uint64_t>(seed));
  const auto positions =
      sample_without_replacement(tokens.size(), perturbation_count(tokens.size(), mask_fraction), rng);
  for (auto pos : positions) tokens[pos] = lexicon(pos, rng);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct DetectGptConfig {
  int n_perturbations = 10;
  double mask_fraction = 0.15;
  std::int64_t seed = 0;
};

// Perturbation discrepancy: log-prob of the text minus the mean log-prob of
// its perturbations. Perturbation i uses seed + i. Higher => machine-like.
inline double detectgpt_score(const ScoringBackend& lm, std::string_view text,
                              const DetectGptConfig& cfg, const Lexicon& lexicon) {
  if (cfg.n_perturbations < 1) throw ArgumentError("n_perturbations must be >= 1");
  const double original = score_log_prob(lm, text);
  double perturbed = 0.0;
  for (int i = 0; i < cfg.n_perturbations; ++i)
    perturbed += score_log_prob(lm, perturb(text, cfg.mask_fraction, cfg.seed + i, lexicon));
  return original - perturbed / cfg.n_perturbations;
}

// Scores one text with any method in the higher-means-machine orientation.
class StatDetector {
 public:
  StatDetector(const NgramLm& lm, StatMethod method, DetectGptConfig dgpt = {})
      : lm_(lm), method_(method), dgpt_(dgpt) {
    if (method_ == StatMethod::DetectGpt) lexicon_ = unigram_lexicon(lm_);
  }

  StatMethod method() const noexcept { return method_; }

  double operator()(std::string_view text) const {
    switch (method_) {
      case StatMethod::LogProb: return score_log_prob(lm_, text);
      case StatMethod::Rank: return -score_rank(lm_, text);
      case StatMethod::LogRank: return -score_log_rank(lm_, text);
      case StatMethod::Entropy: return -score_entropy(lm_, text);
      case StatMethod::DetectGpt: return detectgpt_score(lm_, text, dgpt_, lexicon_);
    }
    return 0.0;
  }

  DetectorScore score(std::string essay_id, std::string_view text) const {
    return {std::move(essay_id), method_, (*this)(text), true};
  }

 private:
  const NgramLm& lm_;
  StatMethod method_;
  DetectGptConfig dgpt_;
  Lexicon lexicon_;
};

}  // namespace outfox
