#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "outfox/error.hpp"
#include "outfox/random.hpp"

namespace outfox {

// Gold or predicted label. LM covers both plain machine essays and
// attacker-generated essays.
enum class Label { Human, LM };

inline std::string_view to_string(Label l) { return l == Label::Human ? "Human" : "LM"; }

inline Label label_from_string(std::string_view s) {
  if (s == "Human") return Label::Human;
  if (s == "LM") return Label::LM;
  throw ArgumentError("unknown label '" + std::string(s) + "'");
}

struct EssayTriplet {
  std::string id;
  std::string problem_statement;
  std::string human_essay;
  std::string lm_essay;
  std::string generator;

  bool operator==(const EssayTriplet&) const = default;
};

struct AttackedEssay {
  std::string problem_id;
  std::string text;
  std::string attacker;
  std::int64_t word_budget = 0;

  bool operator==(const AttackedEssay&) const = default;
};

// Number of maximal runs of non-whitespace characters.
inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

// Ordered triplets plus any attacked essays keyed to them. Immutable once
// loaded; copies are cheap enough at corpus scale.
class Corpus {
 public:
  Corpus() = default;

  // Throws ValidationError on duplicate ids or unresolved attacked entries.
  explicit Corpus(std::vector<EssayTriplet> triplets, std::vector<AttackedEssay> attacked = {})
      : triplets_(std::move(triplets)), attacked_(std::move(attacked)) {
    for (std::size_t i = 0; i < triplets_.size(); ++i) {
      if (!index_.emplace(triplets_[i].id, i).second)
        throw ValidationError(i + 1, "duplicate id '" + triplets_[i].id + "'");
    }
    for (const auto& a : attacked_) {
      if (!index_.contains(a.problem_id))
        throw ValidationError("attacked essay references unknown problem '" + a.problem_id + "'");
    }
  }

  const std::vector<EssayTriplet>& triplets() const noexcept { return triplets_; }
  const std::vector<AttackedEssay>& attacked() const noexcept { return attacked_; }
  std::size_t size() const noexcept { return triplets_.size(); }
  bool empty() const noexcept { return triplets_.empty(); }
  const EssayTriplet& operator[](std::size_t i) const { return triplets_.at(i); }

  std::optional<std::size_t> index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const EssayTriplet& at(const std::string& id) const {
    auto i = index_of(id);
    if (!i) throw DependencyError("unknown problem id '" + id + "'");
    return triplets_[*i];
  }

  // Returns a corpus with the same triplets and the given attacked essays.
  Corpus with_attacked(std::vector<AttackedEssay> attacked) const {
    return Corpus(triplets_, std::move(attacked));
  }

  std::vector<std::string> problem_statements() const {
    std::vector<std::string> out;
    out.reserve(triplets_.size());
    for (const auto& t : triplets_) out.push_back(t.problem_statement);
    return out;
  }

 private:
  std::vector<EssayTriplet> triplets_;
  std::vector<AttackedEssay> attacked_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// JSONL serialization

inline nlohmann::ordered_json to_json(const EssayTriplet& t) {
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["problem_statement"] = t.problem_statement;
  j["human_essay"] = t.human_essay;
  j["lm_essay"] = t.lm_essay;
  j["generator"] = t.generator;
  return j;
}

inline nlohmann::ordered_json to_json(const AttackedEssay& a) {
  nlohmann::ordered_json j;
  j["problem_id"] = a.problem_id;
  j["text"] = a.text;
  j["attacker"] = a.attacker;
  j["word_budget"] = a.word_budget;
  return j;
}

namespace detail {

inline bool blank(std::string_view line) {
  for (unsigned char c : line)
    if (!std::isspace(c)) return false;
  return true;
}

inline std::string require_string(const nlohmann::json& j, const char* key, std::size_t line,
                                  bool non_empty) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw ParseError(line, std::string("field '") + key + "' must be a string");
  auto s = it->get<std::string>();
  if (non_empty && s.empty())
    throw ValidationError(line, std::string("field '") + key + "' is empty");
  return s;
}

template <typename Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "record must be a JSON object");
    fn(j, lineno);
  }
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  return in;
}

}  // namespace detail

inline EssayTriplet triplet_from_json(const nlohmann::json& j, std::size_t line) {
  EssayTriplet t;
  t.id = detail::require_string(j, "id", line, true);
  t.problem_statement = detail::require_string(j, "problem_statement", line, true);
  t.human_essay = detail::require_string(j, "human_essay", line, true);
  t.lm_essay = detail::require_string(j, "lm_essay", line, true);
  t.generator = detail::require_string(j, "generator", line, false);
  return t;
}

inline AttackedEssay attacked_from_json(const nlohmann::json& j, std::size_t line) {
  AttackedEssay a;
  a.problem_id = detail::require_string(j, "problem_id", line, true);
  a.text = detail::require_string(j, "text", line, false);
  a.attacker = detail::require_string(j, "attacker", line, false);
  auto it = j.find("word_budget");
  if (it == j.end() || !it->is_number_integer())
    throw ParseError(line, "field 'word_budget' must be an integer");
  a.word_budget = it->get<std::int64_t>();
  if (a.word_budget <= 0) throw ValidationError(line, "word_budget must be positive");
  return a;
}

inline Corpus read_corpus(std::istream& in) {
  std::vector<EssayTriplet> triplets;
  std::unordered_set<std::string> seen;
  detail::for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t line) {
    auto t = triplet_from_json(j, line);
    if (!seen.insert(t.id).second) throw ValidationError(line, "duplicate id '" + t.id + "'");
    triplets.push_back(std::move(t));
  });
  return Corpus(std::move(triplets));
}

// Loads a triplet JSONL file in file order. Errors carry 1-based line numbers.
inline Corpus load_corpus(const std::string& path) {
  auto in = detail::open_input(path);
  return read_corpus(in);
}

inline std::vector<AttackedEssay> read_attacked(std::istream& in) {
  std::vector<AttackedEssay> out;
  detail::for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t line) {
    out.push_back(attacked_from_json(j, line));
  });
  return out;
}

inline std::vector<AttackedEssay> load_attacked(const std::string& path) {
  auto in = detail::open_input(path);
  return read_attacked(in);
}

// Checks attacked essays against a corpus: every problem id resolves and the
// word budget equals the paired human essay's word count.
inline void validate_attacked(const Corpus& corpus, std::span<const AttackedEssay> attacked) {
  for (std::size_t i = 0; i < attacked.size(); ++i) {
    const auto& a = attacked[i];
    auto idx = corpus.index_of(a.problem_id);
    if (!idx)
      throw ValidationError(i + 1, "attacked essay references unknown problem '" + a.problem_id + "'");
    const auto expected = word_count(corpus[*idx].human_essay);
    if (static_cast<std::size_t>(a.word_budget) != expected)
      throw ValidationError(i + 1, "word_budget " + std::to_string(a.word_budget) +
                                       " != human essay word count " + std::to_string(expected));
  }
}

inline void write_jsonl(std::ostream& out, const std::vector<EssayTriplet>& triplets) {
  for (const auto& t : triplets) out << to_json(t).dump() << '\n';
}

inline void write_jsonl(std::ostream& out, const std::vector<AttackedEssay>& attacked) {
  for (const auto& a : attacked) out << to_json(a).dump() << '\n';
}

template <typename T>
void save_jsonl(const std::string& path, const std::vector<T>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path);
  write_jsonl(out, records);
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  save_jsonl(path, corpus.triplets());
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSizes {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
  std::size_t total() const noexcept { return train + valid + test; }
};

struct CorpusSplit {
  Corpus train;
  Corpus valid;
  Corpus test;
};

// Seeded shuffle of the record order, then consecutive slices. Attacked
// essays follow their problem into whichever partition it lands in.
inline CorpusSplit split(const Corpus& corpus, SplitSizes sizes, std::int64_t seed) {
  if (sizes.total() > corpus.size())
    throw SizeError("split sizes sum to " + std::to_string(sizes.total()) + " but corpus has " +
                    std::to_string(corpus.size()) + " records");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(static_cast<std::uint64_t>(seed));
  shuffle_in_place(std::span<std::size_t>(order), rng);

  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<EssayTriplet> ts;
    std::unordered_set<std::string> ids;
    for (std::size_t i = begin; i < begin + count; ++i) {
      ts.push_back(corpus[order[i]]);
      ids.insert(ts.back().id);
    }
    std::vector<AttackedEssay> as;
    for (const auto& a : corpus.attacked())
      if (ids.contains(a.problem_id)) as.push_back(a);
    return Corpus(std::move(ts), std::move(as));
  };
  return {take(0, sizes.train), take(sizes.train, sizes.valid),
          take(sizes.train + sizes.valid, sizes.test)};
}

// Parses "train,valid,test".
inline SplitSizes parse_split_sizes(std::string_view text) {
  SplitSizes s;
  std::size_t* fields[] = {&s.train, &s.valid, &s.test};
  std::size_t field = 0;
  std::string cur;
  auto flush = [&] {
    if (field >= 3 || cur.empty()) throw ArgumentError("split must be train,valid,test");
    for (char c : cur)
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw ArgumentError("split sizes must be non-negative integers");
    *fields[field++] = std::stoull(cur);
    cur.clear();
  };
  for (char c : text) {
    if (c == ',')
      flush();
    else
      cur.push_back(c);
  }
  flush();
  if (field != 3) throw ArgumentError("split must be train,valid,test");
  return s;
}

}  // namespace outfox
