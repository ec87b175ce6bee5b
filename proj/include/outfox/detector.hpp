#pragma once

// In-context detector: retrieve the k training problems closest to the
// target's problem statement, collect their human essays (label Human) and
// their machine essays (label LM), replacing j randomly chosen machine
// essays by attacked ones, then ask the backend to continue the rendered
// prompt with a label.

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "outfox/backend.hpp"
#include "outfox/corpus.hpp"
#include "outfox/error.hpp"
#include "outfox/hashing.hpp"
#include "outfox/prompting.hpp"
#include "outfox/random.hpp"
#include "outfox/retrieval.hpp"

namespace outfox {

struct DetectorConfig {
  std::size_t k = 5;
  // Number of the k machine examples swapped for attacked essays.
  std::size_t j = 3;
  std::int64_t seed = 0;
  bool example_shuffle = true;
  GenerationParams params = detection_params();
  // Completion attempts before an unparseable answer becomes an error.
  int max_label_attempts = 2;

  void validate() const {
    if (k == 0) throw ArgumentError("detector k must be positive");
    if (j > k) throw ArgumentError("detector j must satisfy 0 <= j <= k");
    if (max_label_attempts < 1) throw ArgumentError("max_label_attempts must be >= 1");
  }
};

inline nlohmann::ordered_json to_json(const DetectorConfig& c) {
  nlohmann::ordered_json j;
  j["k"] = c.k;
  j["j"] = c.j;
  j["seed"] = c.seed;
  j["example_shuffle"] = c.example_shuffle;
  j["params"] = to_json(c.params);
  j["max_label_attempts"] = c.max_label_attempts;
  return j;
}

inline std::string config_hash(const DetectorConfig& c) {
  return sha256_hex(to_json(c).dump()).substr(0, 16);
}

// problem id -> attacked essay used for in-context examples.
using AttackedPool = std::unordered_map<std::string, AttackedEssay>;

inline AttackedPool make_attacked_pool(std::span<const AttackedEssay> attacked) {
  AttackedPool pool;
  for (const auto& a : attacked) pool.insert_or_assign(a.problem_id, a);
  return pool;
}

// Produces an attacked essay for a training triplet when the pool lacks one.
using AttackOnDemand = std::function<AttackedEssay(const EssayTriplet&)>;

inline std::unordered_set<std::size_t> excluded_indices(const Corpus& train,
                                                        std::span<const std::string> exclude_ids) {
  std::unordered_set<std::size_t> out;
  for (const auto& id : exclude_ids)
    if (auto i = train.index_of(id)) out.insert(*i);
  return out;
}

// Builds the 2k-example bundle. Before shuffling, examples are interleaved
// Human/LM by retrieval rank. The attacked subset and the shuffle draw from
// one stream seeded by (cfg.seed, target_problem).
inline DetectorContext build_detector_context(const Corpus& train, const TfidfModel& tfidf,
                                              std::string_view target_problem,
                                              const DetectorConfig& cfg,
                                              const AttackedPool& attacked_pool,
                                              std::span<const std::string> exclude_ids = {},
                                              const AttackOnDemand& on_missing = {}) {
  cfg.validate();
  if (tfidf.num_docs() != train.size())
    throw ArgumentError("TF-IDF model was not fitted on this training corpus");
  const auto exclude = excluded_indices(train, exclude_ids);
  if (train.size() - exclude.size() < cfg.k)
    throw SizeError("detector needs k=" + std::to_string(cfg.k) + " training triplets, have " +
                    std::to_string(train.size() - exclude.size()));

  const auto hits = top_k_closest(tfidf, target_problem, cfg.k, exclude);
  Rng rng(derive_seed(cfg.seed, target_problem));
  const auto chosen = sample_without_replacement(cfg.k, cfg.j, rng);
  const std::unordered_set<std::size_t> attacked_ranks(chosen.begin(), chosen.end());

  DetectorContext ctx;
  ctx.examples.reserve(2 * cfg.k);
  for (std::size_t r = 0; r < hits.size(); ++r) {
    const auto& t = train[hits[r]];
    ctx.examples.push_back({t.human_essay, Label::Human, false, t.id});
    if (attacked_ranks.contains(r)) {
      auto it = attacked_pool.find(t.id);
      if (it != attacked_pool.end()) {
        ctx.examples.push_back({it->second.text, Label::LM, true, t.id});
      } else if (on_missing) {
        ctx.examples.push_back({on_missing(t).text, Label::LM, true, t.id});
      } else {
        throw DependencyError("no attacked essay for training problem '" + t.id + "'");
      }
    } else {
      ctx.examples.push_back({t.lm_essay, Label::LM, false, t.id});
    }
  }
  if (cfg.example_shuffle) shuffle_in_place(std::span<DetectorExample>(ctx.examples), rng);
  return ctx;
}

// Greedy completion followed by label parsing, retried on unparseable output.
inline Label detect(CompletionBackend& backend, const DetectorContext& ctx, std::string_view essay,
                    const GenerationParams& params = detection_params(), int max_attempts = 2) {
  const std::string prompt = render_detector_prompt(ctx, essay);
  std::string last;
  for (int attempt = 0; attempt < std::max(1, max_attempts); ++attempt) {
    last = backend.complete(prompt, params);
    try {
      return parse_label(last);
    } catch (const UnparseableLabelError&) {
    }
  }
  return parse_label(last);
}

// Backends that can score a fixed continuation of a prompt.
class LabelScoringBackend {
 public:
  virtual ~LabelScoringBackend() = default;
  virtual double continuation_log_prob(std::string_view prompt, std::string_view continuation) = 0;
};

// Argmax over the two labels by continuation log-likelihood; ties go to Human.
inline Label detect_by_label_scores(LabelScoringBackend& backend, const DetectorContext& ctx,
                                    std::string_view essay) {
  const std::string prompt = render_detector_prompt(ctx, essay);
  const double human = backend.continuation_log_prob(prompt, to_string(Label::Human));
  const double lm = backend.continuation_log_prob(prompt, to_string(Label::LM));
  return lm > human ? Label::LM : Label::Human;
}

// A configured detector over a fixed training corpus.
class OutfoxDetector {
 public:
  OutfoxDetector(Corpus train, DetectorConfig cfg, CompletionBackend& backend,
                 AttackedPool attacked_pool = {})
      : train_(std::move(train)),
        tfidf_(fit_tfidf(train_.problem_statements())),
        cfg_(std::move(cfg)),
        backend_(backend),
        pool_(std::move(attacked_pool)) {
    cfg_.validate();
  }

  const Corpus& train() const noexcept { return train_; }
  const TfidfModel& tfidf() const noexcept { return tfidf_; }
  const DetectorConfig& config() const noexcept { return cfg_; }
  CompletionBackend& backend() const noexcept { return backend_; }
  std::string config_hash() const { return outfox::config_hash(cfg_); }

  // Opt-in: generate attacked examples that the pool lacks.
  void set_attack_on_demand(AttackOnDemand fn) { on_missing_ = std::move(fn); }

  // Same training data and backend, different config.
  OutfoxDetector with_config(DetectorConfig cfg) const {
    OutfoxDetector d(*this);
    cfg.validate();
    d.cfg_ = std::move(cfg);
    return d;
  }

  // `exclude_id` keeps a training problem from retrieving itself.
  DetectorContext context_for(std::string_view problem_statement,
                              const std::string& exclude_id = {}) const {
    std::vector<std::string> ex;
    if (!exclude_id.empty()) ex.push_back(exclude_id);
    return build_detector_context(train_, tfidf_, problem_statement, cfg_, pool_, ex, on_missing_);
  }

  Label predict(std::string_view problem_statement, std::string_view essay,
                const std::string& exclude_id = {}) const {
    return detect(backend_, context_for(problem_statement, exclude_id), essay, cfg_.params,
                  cfg_.max_label_attempts);
  }

 private:
  Corpus train_;
  TfidfModel tfidf_;
  DetectorConfig cfg_;
  CompletionBackend& backend_;
  AttackedPool pool_;
  AttackOnDemand on_missing_;
};

// One line of the detection output file.
struct DetectionRecord {
  std::string essay_id;
  Label gold = Label::Human;
  Label pred = Label::Human;
  std::size_t k = 0;
  std::size_t j = 0;
  std::int64_t seed = 0;

  bool operator==(const DetectionRecord&) const = default;
};

inline nlohmann::ordered_json to_json(const DetectionRecord& r) {
  nlohmann::ordered_json j;
  j["essay_id"] = r.essay_id;
  j["gold_label"] = to_string(r.gold);
  j["pred_label"] = to_string(r.pred);
  j["k"] = r.k;
  j["j"] = r.j;
  j["seed"] = r.seed;
  return j;
}

inline std::vector<DetectionRecord> load_detections(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  std::vector<DetectionRecord> out;
  detail::for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t line) {
    try {
      out.push_back({j.at("essay_id").get<std::string>(),
                     label_from_string(j.at("gold_label").get<std::string>()),
                     label_from_string(j.at("pred_label").get<std::string>()),
                     j.at("k").get<std::size_t>(), j.at("j").get<std::size_t>(),
                     j.at("seed").get<std::int64_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, e.what());
    } catch (const ArgumentError& e) {
      throw ParseError(line, e.what());
    }
  });
  return out;
}

inline void save_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path);
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace outfox
