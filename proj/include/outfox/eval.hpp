#pragma once

// Recall/F1 reporting with LM as the positive class, and Youden-index
// threshold selection for score-based detectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <unordered_map>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "outfox/corpus.hpp"
#include "outfox/error.hpp"
#include "outfox/parallel.hpp"

namespace outfox {

struct ScoredLabel {
  double score = 0.0;  // higher means machine
  Label gold = Label::Human;
};

struct YoudenResult {
  double threshold = 0.0;
  double j = 0.0;
};

// Candidates are the distinct observed scores; an item is LM iff score >= t.
// Returns the t maximizing TPR - FPR, smallest t on ties. The comparison is
// done on integer numerators so ties are exact.
inline YoudenResult youden(std::span<const ScoredLabel> scores) {
  std::int64_t pos = 0;
  std::int64_t neg = 0;
  for (const auto& s : scores) (s.gold == Label::LM ? pos : neg) += 1;
  if (pos == 0 || neg == 0)
    throw ArgumentError("youden threshold needs both Human and LM gold labels");

  std::vector<ScoredLabel> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.score > b.score; });
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t best_num = 0;
  double best_t = 0.0;
  bool have = false;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == t) {
      (sorted[i].gold == Label::LM ? tp : fp) += 1;
      ++i;
    }
    // J * pos * neg
    const std::int64_t num = tp * neg - fp * pos;
    if (!have || num >= best_num) {
      best_num = num;
      best_t = t;
      have = true;
    }
  }
  return {best_t, static_cast<double>(best_num) / static_cast<double>(pos * neg)};
}

inline double youden_threshold(std::span<const ScoredLabel> scores) {
  return youden(scores).threshold;
}

struct Confusion {
  std::int64_t tp = 0;  // LM predicted LM
  std::int64_t fp = 0;  // Human predicted LM
  std::int64_t tn = 0;  // Human predicted Human
  std::int64_t fn = 0;  // LM predicted Human
  std::int64_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct EvalReport {
  // Percentages at full precision; serialization rounds to one decimal.
  double human_rec = 0.0;
  double machine_rec = 0.0;
  double avg_rec = 0.0;
  double f1 = 0.0;
  Confusion counts;
  std::optional<double> threshold;  // nullopt for label-output detectors
  bool human_class_absent = false;
  bool machine_class_absent = false;
  // Completions that stayed unparseable after retry; counted as Human.
  std::int64_t unparseable = 0;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();
};

inline EvalReport report_from_confusion(const Confusion& c) {
  EvalReport r;
  r.counts = c;
  const auto humans = c.tn + c.fp;
  const auto machines = c.tp + c.fn;
  r.human_class_absent = humans == 0;
  r.machine_class_absent = machines == 0;
  r.human_rec = humans ? 100.0 * static_cast<double>(c.tn) / static_cast<double>(humans) : 0.0;
  r.machine_rec = machines ? 100.0 * static_cast<double>(c.tp) / static_cast<double>(machines) : 0.0;
  r.avg_rec = (r.human_rec + r.machine_rec) / 2.0;
  const auto f1_den = 2 * c.tp + c.fp + c.fn;
  r.f1 = f1_den ? 100.0 * static_cast<double>(2 * c.tp) / static_cast<double>(f1_den) : 0.0;
  return r;
}

inline Confusion confusion(std::span<const std::pair<Label, Label>> gold_pred) {
  Confusion c;
  for (const auto& [gold, pred] : gold_pred) {
    if (gold == Label::LM)
      (pred == Label::LM ? c.tp : c.fn) += 1;
    else
      (pred == Label::LM ? c.fp : c.tn) += 1;
  }
  return c;
}

// (gold, predicted) pairs -> HumanRec / MachineRec / AvgRec / F1 on LM.
inline EvalReport metrics(std::span<const std::pair<Label, Label>> gold_pred) {
  if (gold_pred.empty()) throw ArgumentError("metrics: no predictions");
  return report_from_confusion(confusion(gold_pred));
}

inline double round1(double x) { return std::round(x * 10.0) / 10.0; }

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["human_rec"] = round1(r.human_rec);
  j["machine_rec"] = round1(r.machine_rec);
  j["avg_rec"] = round1(r.avg_rec);
  j["f1"] = round1(r.f1);
  j["threshold"] = r.threshold ? nlohmann::ordered_json(*r.threshold) : nlohmann::ordered_json("n/a");
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}};
  j["unrounded"] = {{"human_rec", r.human_rec},
                    {"machine_rec", r.machine_rec},
                    {"avg_rec", r.avg_rec},
                    {"f1", r.f1}};
  j["flags"] = {{"human_class_absent", r.human_class_absent},
                {"machine_class_absent", r.machine_class_absent},
                {"unparseable_as_human", r.unparseable}};
  j["metadata"] = r.metadata;
  return j;
}

inline std::string csv_header() { return "detector,attacker,mode,human_rec,machine_rec,avg_rec,f1,threshold"; }

inline std::string to_csv_row(const EvalReport& r) {
  auto meta = [&](const char* key) {
    return r.metadata.contains(key) ? r.metadata[key].get<std::string>() : std::string();
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", round1(v));
    return std::string(buf);
  };
  std::string row = meta("detector") + "," + meta("attacker") + "," + meta("mode") + "," +
                    fmt(r.human_rec) + "," + fmt(r.machine_rec) + "," + fmt(r.avg_rec) + "," +
                    fmt(r.f1) + ",";
  if (r.threshold) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *r.threshold);
    row += buf;
  } else {
    row += "n/a";
  }
  return row;
}

// ---------------------------------------------------------------------------
// Test mixtures

// Which machine-side essays are evaluated. An empty attacker tag means the
// stored (non-attacked) machine essays.
struct EvalMode {
  std::string attacker;
  bool attacked() const noexcept { return !attacker.empty(); }
  std::string name() const { return attacked() ? "attacked" : "non_attacked"; }
  static EvalMode non_attacked() { return {}; }
  static EvalMode attacked_by(std::string tag) { return {std::move(tag)}; }
};

struct EvalItem {
  std::string essay_id;
  std::string problem_id;
  std::string problem_statement;
  std::string text;
  Label gold = Label::Human;
};

// One human and one machine item per test problem, human first. Attacked mode
// swaps only the machine side for the named attacker's essays.
inline std::vector<EvalItem> build_eval_items(const Corpus& test, const EvalMode& mode,
                                              std::span<const AttackedEssay> attacked = {}) {
  std::unordered_map<std::string, const AttackedEssay*> by_problem;
  if (mode.attacked()) {
    for (const auto& a : attacked)
      if (a.attacker == mode.attacker) by_problem.insert_or_assign(a.problem_id, &a);
  }
  std::vector<EvalItem> items;
  items.reserve(2 * test.size());
  for (const auto& t : test.triplets()) {
    items.push_back({t.id + ":human", t.id, t.problem_statement, t.human_essay, Label::Human});
    if (mode.attacked()) {
      auto it = by_problem.find(t.id);
      if (it == by_problem.end())
        throw DependencyError("no '" + mode.attacker + "' attacked essay for test problem '" + t.id + "'");
      items.push_back({t.id + ":attacked:" + mode.attacker, t.id, t.problem_statement,
                       it->second->text, Label::LM});
    } else {
      items.push_back({t.id + ":lm", t.id, t.problem_statement, t.lm_essay, Label::LM});
    }
  }
  return items;
}

struct Prediction {
  std::string essay_id;
  Label gold = Label::Human;
  Label pred = Label::Human;
  std::optional<double> score;
  bool unparseable = false;
};

struct EvalResult {
  EvalReport report;
  std::vector<Prediction> predictions;  // item order
};

// Label-output detector handle.
struct LabelDetectorHandle {
  std::string tag;
  std::function<Label(const EvalItem&)> predict;
};

// Score-output detector handle (higher means machine).
struct ScoreDetectorHandle {
  std::string tag;
  std::function<double(const EvalItem&)> score;
};

namespace detail {
inline EvalResult finish(std::vector<Prediction> preds, const std::string& tag, const EvalMode& mode) {
  std::vector<std::pair<Label, Label>> pairs;
  pairs.reserve(preds.size());
  std::int64_t unparseable = 0;
  for (const auto& p : preds) {
    pairs.emplace_back(p.gold, p.pred);
    unparseable += p.unparseable ? 1 : 0;
  }
  EvalResult out{metrics(pairs), std::move(preds)};
  out.report.unparseable = unparseable;
  out.report.metadata["detector"] = tag;
  out.report.metadata["attacker"] = mode.attacked() ? mode.attacker : std::string("none");
  out.report.metadata["mode"] = mode.name();
  return out;
}
}  // namespace detail

// Unparseable completions count as Human predictions and are flagged.
inline EvalResult evaluate(const LabelDetectorHandle& detector, const std::vector<EvalItem>& items,
                           const EvalMode& mode, int jobs = 1) {
  std::vector<Prediction> preds(items.size());
  auto errors = parallel_for(items.size(), jobs, [&](std::size_t i) {
    const auto& it = items[i];
    preds[i] = {it.essay_id, it.gold, Label::Human, std::nullopt, false};
    try {
      preds[i].pred = detector.predict(it);
    } catch (const UnparseableLabelError&) {
      preds[i].unparseable = true;
    }
  });
  rethrow_first(errors);
  return detail::finish(std::move(preds), detector.tag, mode);
}

inline EvalResult evaluate(const ScoreDetectorHandle& detector, const std::vector<EvalItem>& items,
                           const EvalMode& mode, double threshold, int jobs = 1) {
  std::vector<Prediction> preds(items.size());
  auto errors = parallel_for(items.size(), jobs, [&](std::size_t i) {
    const auto& it = items[i];
    const double s = detector.score(it);
    preds[i] = {it.essay_id, it.gold, s >= threshold ? Label::LM : Label::Human, s, false};
  });
  rethrow_first(errors);
  auto out = detail::finish(std::move(preds), detector.tag, mode);
  out.report.threshold = threshold;
  return out;
}

// Scores the validation mixture and returns its Youden threshold.
inline YoudenResult fit_threshold(const ScoreDetectorHandle& detector,
                                  const std::vector<EvalItem>& valid_items, int jobs = 1) {
  std::vector<ScoredLabel> scored(valid_items.size());
  auto errors = parallel_for(valid_items.size(), jobs, [&](std::size_t i) {
    scored[i] = {detector.score(valid_items[i]), valid_items[i].gold};
  });
  rethrow_first(errors);
  return youden(scored);
}

// Aligned text table with the four headline metric columns.
inline std::string format_table(const std::vector<EvalReport>& reports) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-10s %-13s %9s %11s %7s %6s\n", "Detector", "Attacker",
                "Mode", "HumanRec", "MachineRec", "AvgRec", "F1");
  out += line;
  for (const auto& r : reports) {
    auto meta = [&](const char* key) {
      return r.metadata.contains(key) ? r.metadata[key].get<std::string>() : std::string("-");
    };
    std::snprintf(line, sizeof line, "%-14s %-10s %-13s %9.1f %11.1f %7.1f %6.1f\n",
                  meta("detector").c_str(), meta("attacker").c_str(), meta("mode").c_str(),
                  round1(r.human_rec), round1(r.machine_rec), round1(r.avg_rec), round1(r.f1));
    out += line;
  }
  return out;
}

}  // namespace outfox
