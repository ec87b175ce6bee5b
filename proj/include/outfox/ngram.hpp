#pragma once

// Add-alpha smoothed n-gram language model. Serves per-token log
// probabilities, ranks, and predictive entropies through ScoringBackend.
//
// Tokens are lowercased whitespace-separated words. The predictive
// vocabulary is every training word plus <unk> and <eos>; <bos> only pads
// contexts. Token ids follow lexicographic order of the token strings, which
// makes id order the rank tie-break order.
//
//   P(w | ctx) = (c(ctx, w) + alpha) / (c(ctx) + alpha * |V|)

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "outfox/backend.hpp"
#include "outfox/corpus.hpp"
#include "outfox/error.hpp"
#include "outfox/random.hpp"

namespace outfox {

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kBosToken = "<bos>";

inline std::vector<std::string> lm_tokenize(std::string_view text) {
  auto words = split_words(text);
  for (auto& w : words)
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return words;
}

class NgramLm final : public ScoringBackend {
 public:
  using TokenId = std::uint32_t;
  static constexpr TokenId kBosId = 0xFFFFFFFFu;

  struct ContextCounts {
    std::map<TokenId, std::uint64_t> next;
    std::uint64_t total = 0;
  };

  int order() const noexcept { return n_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }
  TokenId unk_id() const noexcept { return unk_; }
  TokenId eos_id() const noexcept { return eos_; }

  TokenId id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? unk_ : it->second;
  }

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& t : lm_tokenize(text)) out.push_back(id_of(t));
    return out;
  }

  // Context of length n-1 ending just before `pos`, padded with <bos>.
  std::vector<TokenId> context_at(std::span<const TokenId> ids, std::size_t pos) const {
    std::vector<TokenId> ctx(static_cast<std::size_t>(n_ - 1), kBosId);
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      const std::size_t back = ctx.size() - i;
      if (pos >= back) ctx[i] = ids[pos - back];
    }
    return ctx;
  }

  double prob(std::span<const TokenId> context, TokenId token) const {
    const auto* cc = counts_for(context);
    const double denom = static_cast<double>(cc ? cc->total : 0) + alpha_ * static_cast<double>(vocab_.size());
    return (static_cast<double>(count(cc, token)) + alpha_) / denom;
  }

  // Full next-token distribution indexed by token id.
  std::vector<double> distribution(std::span<const TokenId> context) const {
    std::vector<double> p(vocab_.size());
    for (TokenId t = 0; t < vocab_.size(); ++t) p[t] = prob(context, t);
    return p;
  }

  // 1-based rank of `token` in the distribution sorted by descending
  // probability, ties broken by ascending token string.
  std::int64_t rank(std::span<const TokenId> context, TokenId token) const {
    const auto* cc = counts_for(context);
    const std::uint64_t c = count(cc, token);
    std::int64_t above = 0;
    if (c > 0) {
      for (const auto& [t, ct] : cc->next)
        if (ct > c || (ct == c && t < token)) ++above;
    } else {
      std::int64_t seen_below = 0;
      std::int64_t seen = 0;
      if (cc) {
        for (const auto& [t, ct] : cc->next) {
          if (ct == 0) continue;
          ++seen;
          if (t < token) ++seen_below;
        }
      }
      above = seen + (static_cast<std::int64_t>(token) - seen_below);
    }
    return above + 1;
  }

  // Shannon entropy (nats) of the next-token distribution.
  double entropy(std::span<const TokenId> context) const {
    const auto* cc = counts_for(context);
    const double denom = static_cast<double>(cc ? cc->total : 0) + alpha_ * static_cast<double>(vocab_.size());
    double h = 0.0;
    std::size_t seen = 0;
    if (cc) {
      for (const auto& [t, ct] : cc->next) {
        const double p = (static_cast<double>(ct) + alpha_) / denom;
        h -= p * std::log(p);
        ++seen;
      }
    }
    const double p0 = alpha_ / denom;
    h -= static_cast<double>(vocab_.size() - seen) * p0 * std::log(p0);
    return std::max(h, 0.0);
  }

  std::vector<TokenScore> score_tokens(std::string_view text) const override {
    const auto ids = encode(text);
    std::vector<TokenScore> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto ctx = context_at(ids, i);
      out.push_back({vocab_[ids[i]], std::log(prob(ctx, ids[i])), rank(ctx, ids[i]), entropy(ctx)});
    }
    return out;
  }

  // Unigram counts of training words (specials excluded), id order.
  const std::vector<std::pair<std::string, std::uint64_t>>& unigram_counts() const noexcept {
    return unigrams_;
  }

  // Draws one text by ancestral sampling until <eos> or max_tokens.
  std::string sample(Rng& rng, std::size_t max_tokens) const {
    std::vector<TokenId> ids;
    std::string out;
    while (ids.size() < max_tokens) {
      const auto ctx = context_at(ids, ids.size());
      const auto p = distribution(ctx);
      double u = uniform_unit(rng);
      TokenId pick = static_cast<TokenId>(p.size() - 1);
      for (TokenId t = 0; t < p.size(); ++t) {
        if (u < p[t]) {
          pick = t;
          break;
        }
        u -= p[t];
      }
      if (pick == eos_) break;
      ids.push_back(pick);
      if (!out.empty()) out += ' ';
      out += vocab_[pick];
    }
    return out;
  }

  friend NgramLm train_ngram(const std::vector<std::string>& texts, int n, double alpha);

 private:
  static std::string key_of(std::span<const TokenId> ctx) {
    return std::string(reinterpret_cast<const char*>(ctx.data()), ctx.size() * sizeof(TokenId));
  }

  const ContextCounts* counts_for(std::span<const TokenId> ctx) const {
    auto it = contexts_.find(key_of(ctx));
    return it == contexts_.end() ? nullptr : &it->second;
  }

  static std::uint64_t count(const ContextCounts* cc, TokenId t) {
    if (!cc) return 0;
    auto it = cc->next.find(t);
    return it == cc->next.end() ? 0 : it->second;
  }

  int n_ = 2;
  double alpha_ = 1.0;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, TokenId> ids_;
  TokenId unk_ = 0;
  TokenId eos_ = 0;
  std::unordered_map<std::string, ContextCounts> contexts_;
  std::vector<std::pair<std::string, std::uint64_t>> unigrams_;
};

// Each text is padded with <bos> context and terminated by <eos>.
inline NgramLm train_ngram(const std::vector<std::string>& texts, int n = 2, double alpha = 1.0) {
  if (texts.empty()) throw ArgumentError("train_ngram: empty corpus");
  if (n < 1) throw ArgumentError("train_ngram: order must be >= 1");
  if (!(alpha > 0.0)) throw ArgumentError("train_ngram: alpha must be > 0");

  std::vector<std::vector<std::string>> tokenized;
  std::map<std::string, std::uint64_t> words;
  for (const auto& t : texts) {
    tokenized.push_back(lm_tokenize(t));
    for (const auto& w : tokenized.back()) ++words[w];
  }
  NgramLm lm;
  lm.n_ = n;
  lm.alpha_ = alpha;
  std::vector<std::string> vocab;
  for (const auto& [w, c] : words) vocab.push_back(w);
  vocab.emplace_back(kUnkToken);
  vocab.emplace_back(kEosToken);
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  for (NgramLm::TokenId i = 0; i < vocab.size(); ++i) lm.ids_.emplace(vocab[i], i);
  lm.vocab_ = std::move(vocab);
  lm.unk_ = lm.ids_.at(std::string(kUnkToken));
  lm.eos_ = lm.ids_.at(std::string(kEosToken));
  for (const auto& [w, c] : words) lm.unigrams_.emplace_back(w, c);

  for (const auto& toks : tokenized) {
    std::vector<NgramLm::TokenId> ids;
    for (const auto& w : toks) ids.push_back(lm.ids_.at(w));
    ids.push_back(lm.eos_);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto& cc = lm.contexts_[NgramLm::key_of(lm.context_at(ids, i))];
      ++cc.next[ids[i]];
      ++cc.total;
    }
  }
  return lm;
}

}  // namespace outfox
