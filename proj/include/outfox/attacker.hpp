#pragma once

// Attacker: show the backend how the (attack-unaware) detector labelled
// machine essays for similar problems, then ask for an essay on the target
// problem that continues "Answer: Human. Essay: ".

#include <cstdint>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "outfox/backend.hpp"
#include "outfox/corpus.hpp"
#include "outfox/detector.hpp"
#include "outfox/error.hpp"
#include "outfox/parallel.hpp"
#include "outfox/prompting.hpp"
#include "outfox/retrieval.hpp"

namespace outfox {

struct AttackerConfig {
  std::size_t k = 10;
  std::int64_t seed = 0;
  GenerationParams params = generation_params();
  std::string tag = "outfox";
};

// Detector labels keyed by (essay id, detector config hash).
using PredictionCache = OnceMap<Label>;

namespace detail {
// Rethrows the active exception as the same category with `prefix` prepended.
[[noreturn]] inline void rethrow_annotated(const std::string& prefix) {
  try {
    throw;
  } catch (const UnparseableLabelError& e) {
    throw UnparseableLabelError(prefix + e.what());
  } catch (const ScriptMissError& e) {
    throw ScriptMissError(prefix + e.what());
  } catch (const CredentialError& e) {
    throw CredentialError(prefix + e.what());
  } catch (const BackendUnavailableError& e) {
    throw BackendUnavailableError(prefix + e.what());
  } catch (const BackendError& e) {
    throw BackendError(prefix + e.what());
  } catch (const DependencyError& e) {
    throw DependencyError(prefix + e.what());
  } catch (const SizeError& e) {
    throw SizeError(prefix + e.what());
  } catch (const GenerationError& e) {
    throw GenerationError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}
}  // namespace detail

// R_atk for one target problem. The detector must be attack-unaware (j = 0).
// The target's own id is excluded from retrieval; its human essay is read
// only for the word budget.
inline AttackContext build_attack_context(const Corpus& train, const TfidfModel& tfidf,
                                          const EssayTriplet& target, const OutfoxDetector& detector,
                                          const AttackerConfig& cfg, PredictionCache* cache = nullptr) {
  if (cfg.k == 0) throw ArgumentError("attacker k must be positive");
  if (detector.config().j != 0)
    throw ArgumentError("attacker requires an attack-unaware detector (j = 0)");
  const std::vector<std::string> ex{target.id};
  const auto exclude = excluded_indices(train, ex);
  if (train.size() - exclude.size() < cfg.k)
    throw SizeError("attacker needs k=" + std::to_string(cfg.k) + " training triplets, have " +
                    std::to_string(train.size() - exclude.size()));
  const auto hits = top_k_closest(tfidf, target.problem_statement, cfg.k, exclude);

  AttackContext ctx;
  ctx.word_budget = static_cast<std::int64_t>(word_count(target.human_essay));
  const std::string det_hash = detector.config_hash();
  for (auto idx : hits) {
    const auto& t = train[idx];
    const std::string key = t.id + ":lm|" + det_hash;
    auto compute = [&] {
      try {
        return detector.predict(t.problem_statement, t.lm_essay, t.id);
      } catch (const Error&) {
        detail::rethrow_annotated("detector failed on problem '" + t.id + "': ");
      }
    };
    const Label label = cache ? cache->get_or_compute(key, compute) : compute();
    ctx.examples.push_back({t.problem_statement, label, t.lm_essay, t.id});
  }
  return ctx;
}

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

inline AttackedEssay attack(CompletionBackend& backend, const AttackContext& ctx,
                            const EssayTriplet& target, const AttackerConfig& cfg) {
  GenerationParams params = cfg.params;
  if (!params.seed) params.seed = cfg.seed;
  std::string text = backend.complete(render_attacker_prompt(ctx, target.problem_statement), params);
  if (is_blank(text))
    throw GenerationError("empty completion for problem '" + target.id + "'");
  return {target.id, std::move(text), cfg.tag, ctx.word_budget};
}

struct AttackFailure {
  std::string problem_id;
  std::string error;
};

struct BatchAttackResult {
  std::vector<AttackedEssay> essays;  // input order, failures omitted
  std::vector<AttackFailure> failures;
};

struct BatchPolicy {
  bool continue_on_error = false;
  int jobs = 1;
};

// One attacked essay per problem, in input order. Fail-fast rethrows the
// lowest-index failure; continue-on-error records it instead.
inline BatchAttackResult batch_attack(const Corpus& train, const TfidfModel& tfidf,
                                      const std::vector<EssayTriplet>& problems,
                                      const OutfoxDetector& detector, CompletionBackend& backend,
                                      const AttackerConfig& cfg, BatchPolicy policy = {},
                                      PredictionCache* cache = nullptr) {
  PredictionCache local;
  if (!cache) cache = &local;
  std::vector<std::optional<AttackedEssay>> slots(problems.size());
  auto errors = parallel_for(problems.size(), policy.jobs, [&](std::size_t i) {
    const auto ctx = build_attack_context(train, tfidf, problems[i], detector, cfg, cache);
    slots[i] = attack(backend, ctx, problems[i], cfg);
  });
  if (!policy.continue_on_error) rethrow_first(errors);

  BatchAttackResult out;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        out.failures.push_back({problems[i].id, e.what()});
      }
    } else {
      out.essays.push_back(std::move(*slots[i]));
    }
  }
  return out;
}

inline void save_failures(const std::string& path, const std::vector<AttackFailure>& failures) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path);
  for (const auto& f : failures) {
    nlohmann::ordered_json j;
    j["problem_id"] = f.problem_id;
    j["error"] = f.error;
    out << j.dump() << '\n';
  }
}

// Fills missing machine essays by prompting a backend. Small-scale helper
// for building toy corpora; existing lm_essay fields are kept.
inline std::vector<EssayTriplet> synthesize_lm_essays(std::vector<EssayTriplet> triplets,
                                                      CompletionBackend& backend,
                                                      const std::string& generator_tag,
                                                      GenerationParams params = generation_params()) {
  for (auto& t : triplets) {
    if (!is_blank(t.lm_essay)) continue;
    const std::string prompt = "Given the following problem statement, please write an essay in " +
                               std::to_string(word_count(t.human_essay)) +
                               " words with a clear opinion\nProblem Statement: " +
                               t.problem_statement + ". Essay: ";
    t.lm_essay = backend.complete(prompt, params);
    if (is_blank(t.lm_essay)) throw GenerationError("empty completion for problem '" + t.id + "'");
    t.generator = generator_tag;
  }
  return triplets;
}

}  // namespace outfox
