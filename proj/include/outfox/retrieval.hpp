#pragma once

// TF-IDF retrieval over problem statements.
//
// Weighting follows the common smoothed convention:
//   tf(t, d)  = raw count of t in d
//   idf(t)    = ln((1 + n_docs) / (1 + df(t))) + 1
//   v(d)      = tf * idf, L2-normalized (zero vector stays zero)
// Tokens are lowercased runs of alphanumeric characters of length >= 2.
// Bytes >= 0x80 count as alphanumeric so UTF-8 words stay intact.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "outfox/error.hpp"

namespace outfox {

struct SparseEntry {
  std::size_t index;
  double weight;
  bool operator==(const SparseEntry&) const = default;
};

// Entries sorted by strictly increasing index.
struct SparseVector {
  std::vector<SparseEntry> entries;

  double norm() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.weight * e.weight;
    return std::sqrt(s);
  }
  bool is_zero() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const SparseEntry& e) { return e.weight == 0.0; });
  }
};

inline double dot(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  auto ia = a.entries.begin();
  auto ib = b.entries.begin();
  while (ia != a.entries.end() && ib != b.entries.end()) {
    if (ia->index < ib->index) {
      ++ia;
    } else if (ib->index < ia->index) {
      ++ib;
    } else {
      s += ia->weight * ib->weight;
      ++ia;
      ++ib;
    }
  }
  return s;
}

// dot(a,b) / (|a| |b|); 0 when either vector is zero. Clamped to [-1, 1].
inline double cosine_similarity(const SparseVector& a, const SparseVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// Retrieval ranks by ascending closeness, i.e. descending similarity.
inline double closeness(const SparseVector& a, const SparseVector& b) {
  return 1.0 - cosine_similarity(a, b);
}

inline std::vector<std::string> tfidf_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) out.push_back(cur);
    cur.clear();
  };
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c))
      cur.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  return out;
}

class TfidfModel {
 public:
  TfidfModel() = default;

  const std::map<std::string, std::size_t>& vocabulary() const noexcept { return vocab_; }
  const std::vector<double>& idf() const noexcept { return idf_; }
  const std::vector<SparseVector>& doc_vectors() const noexcept { return docs_; }
  std::size_t num_docs() const noexcept { return docs_.size(); }
  std::size_t dimension() const noexcept { return idf_.size(); }

  double idf_of(const std::string& term) const {
    auto it = vocab_.find(term);
    if (it == vocab_.end()) throw ArgumentError("term '" + term + "' not in vocabulary");
    return idf_[it->second];
  }

  // Vectorizes unseen text with the fitted vocabulary; unknown terms are dropped.
  SparseVector transform(std::string_view text) const {
    std::map<std::size_t, double> counts;
    for (const auto& tok : tfidf_tokenize(text)) {
      auto it = vocab_.find(tok);
      if (it != vocab_.end()) counts[it->second] += 1.0;
    }
    return weighted(counts);
  }

  friend TfidfModel fit_tfidf(const std::vector<std::string>& documents);

 private:
  SparseVector weighted(const std::map<std::size_t, double>& counts) const {
    SparseVector v;
    double sq = 0.0;
    for (const auto& [idx, tf] : counts) {
      const double w = tf * idf_[idx];
      v.entries.push_back({idx, w});
      sq += w * w;
    }
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (auto& e : v.entries) e.weight *= inv;
    }
    return v;
  }

  std::map<std::string, std::size_t> vocab_;
  std::vector<double> idf_;
  std::vector<SparseVector> docs_;
};

// Column indices follow lexicographic term order.
inline TfidfModel fit_tfidf(const std::vector<std::string>& documents) {
  if (documents.empty()) throw ArgumentError("fit_tfidf: no documents");
  TfidfModel m;
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(documents.size());
  std::map<std::string, std::size_t> df;
  for (const auto& d : documents) {
    tokenized.push_back(tfidf_tokenize(d));
    std::unordered_set<std::string> uniq(tokenized.back().begin(), tokenized.back().end());
    for (const auto& t : uniq) ++df[t];
  }
  const double n = static_cast<double>(documents.size());
  for (const auto& [term, count] : df) {
    m.vocab_.emplace(term, m.idf_.size());
    m.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  m.docs_.reserve(documents.size());
  for (const auto& toks : tokenized) {
    std::map<std::size_t, double> counts;
    for (const auto& t : toks) counts[m.vocab_.at(t)] += 1.0;
    m.docs_.push_back(m.weighted(counts));
  }
  return m;
}

// Similarities are compared after rounding to 1e-12 so that mathematically
// equal values differing only by summation-order noise count as ties.
inline std::int64_t similarity_key(double s) { return static_cast<std::int64_t>(std::llround(s * 1e12)); }

// Indices of the k documents closest to `query`, most similar first; equal
// similarities fall back to ascending document index. Documents listed in
// `exclude` are never returned.
inline std::vector<std::size_t> top_k_closest(const TfidfModel& model, std::string_view query,
                                              std::size_t k,
                                              const std::unordered_set<std::size_t>& exclude = {}) {
  const SparseVector q = model.transform(query);
  std::vector<std::pair<std::int64_t, std::size_t>> scored;
  scored.reserve(model.num_docs());
  for (std::size_t i = 0; i < model.num_docs(); ++i) {
    if (exclude.contains(i)) continue;
    scored.emplace_back(similarity_key(cosine_similarity(q, model.doc_vectors()[i])), i);
  }
  if (k == 0 || k > scored.size())
    throw ArgumentError("top_k_closest: k=" + std::to_string(k) + " but " +
                        std::to_string(scored.size()) + " eligible documents");
  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    better);
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = scored[i].second;
  return out;
}

}  // namespace outfox
