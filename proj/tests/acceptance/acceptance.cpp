// Acceptance runner: one PASS/FAIL/SKIP line per criterion, each with its
// runtime against a wall-clock budget. Exit status is non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "../test_support.hpp"
#include "outfox/http_backend.hpp"
#include "outfox/outfox.hpp"

using namespace outfox;
namespace fs = std::filesystem;

namespace {

struct Skip {
  std::string why;
};

// Thrown by check(); carries the first violated expectation.
struct Violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Violation(what);
}

std::string fixture(const std::string& name) {
  return outfox::testing::read_file(std::string(OUTFOX_FIXTURE_DIR) + "/" + name);
}

// --- 1 ----------------------------------------------------------------------

void prompt_fidelity() {
  DetectorContext one;
  one.examples = {{"aaa", Label::Human}};
  check(render_detector_prompt(one, "bbb") == fixture("detector_one_example.txt"), "detector 1-example golden");
  check(render_detector_prompt(one, "bbb") ==
            "Please classify whether the text is generated by a human or a Language Model (LM)."
            "\nText: aaa Answer: Human\nText: bbb. Answer: ",
        "detector 1-example literal");

  DetectorContext four;
  four.examples = {{"i like dogs a lot", Label::Human},
                   {"Dogs are loyal companions.", Label::LM},
                   {"cats r ok", Label::Human},
                   {"Cats offer independence.", Label::LM, true}};
  check(render_detector_prompt(four, "Birds sing in the morning.") == fixture("detector_four_examples.txt"),
        "detector 4-example golden");

  AttackContext atk;
  atk.word_budget = 120;
  atk.examples = {{"Is homework useful", Label::LM, "Homework builds discipline."},
                  {"Should phones be banned", Label::Human, "phones r fine i guess"}};
  const auto p = render_attacker_prompt(atk, "Are uniforms good");
  check(p == fixture("attacker_two_examples.txt"), "attacker golden");
  check(p.ends_with("Answer: Human. Essay: "), "attacker suffix");
  check(p.find("in 120 words") != std::string::npos, "word budget substitution");
}

// --- 2 ----------------------------------------------------------------------

void cardinality() {
  const auto train = outfox::testing::toy_corpus(40);
  std::vector<AttackedEssay> att;
  for (const auto& t : train.triplets())
    att.push_back({t.id, "attacked essay for " + t.id, "outfox", static_cast<std::int64_t>(word_count(t.human_essay))});
  const auto pool = make_attacked_pool(att);
  const auto tfidf = fit_tfidf(train.problem_statements());
  MockBackend mock({}, std::string("LM"));

  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 1 + rng() % 10;
    const std::size_t j = rng() % (k + 1);
    DetectorConfig cfg;
    cfg.k = k;
    cfg.j = j;
    cfg.seed = static_cast<std::int64_t>(rng() % 1000);
    const auto target = "Should students write about " + outfox::testing::topics()[rng() % 15] + " today";
    const auto ctx = build_detector_context(train, tfidf, target, cfg, pool);
    std::size_t humans = 0, attacked = 0;
    for (const auto& e : ctx.examples) {
      humans += e.label == Label::Human;
      attacked += e.attacked;
    }
    const auto tag = "k=" + std::to_string(k) + " j=" + std::to_string(j);
    check(ctx.examples.size() == 2 * k, tag + ": |R_det| != 2k");
    check(humans == k, tag + ": Human count != k");
    check(attacked == j, tag + ": attacked count != j");

    DetectorConfig plain;
    plain.k = std::min<std::size_t>(k, 5);
    plain.j = 0;
    OutfoxDetector detector(train, plain, mock);
    AttackerConfig acfg;
    acfg.k = k;
    const auto actx = build_attack_context(detector.train(), detector.tfidf(), train[trial % train.size()],
                                           detector, acfg);
    check(actx.examples.size() == k, tag + ": |R_atk| != k");
  }
}

// --- 3 ----------------------------------------------------------------------

void retrieval_oracle() {
  std::mt19937_64 rng(77);
  const std::vector<std::string> words = {"school", "uniform", "homework", "game",  "video",  "policy",
                                          "city",   "park",    "phone",    "space", "travel", "sport",
                                          "team",   "lunch",   "car",      "ev",    "a",      "Public"};
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<std::string> docs;
    for (std::size_t i = 0; i < n; ++i) {
      std::string d;
      const std::size_t len = 1 + rng() % 8;
      for (std::size_t w = 0; w < len; ++w) d += words[rng() % words.size()] + (w + 1 < len ? " " : "");
      docs.push_back(d + " doc");
    }
    const auto model = fit_tfidf(docs);
    for (const auto& v : model.doc_vectors())
      check(std::abs(v.norm() - 1.0) <= 1e-9, "doc vector not unit length");
    const auto dense = oracle::dense_tfidf(docs);
    std::string query;
    for (int w = 0; w < 3; ++w) query += words[rng() % words.size()] + " ";
    const auto expected = oracle::full_ranking(dense, query);
    for (std::size_t k = 1; k <= n; ++k) {
      const auto got = top_k_closest(model, query, k);
      check(got.size() == k, "wrong result size");
      for (std::size_t r = 0; r < k; ++r)
        check(got[r] == expected[r].first,
              "corpus " + std::to_string(c) + " k=" + std::to_string(k) + " rank " + std::to_string(r));
    }
  }
}

// --- 4 ----------------------------------------------------------------------

void metric_oracles() {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<Label> gold, pred;
    std::vector<std::pair<Label, Label>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(rng() % 2 ? Label::LM : Label::Human);
      pred.push_back(rng() % 2 ? Label::LM : Label::Human);
      pairs.emplace_back(gold.back(), pred.back());
    }
    const auto c = oracle::confusion(gold, pred);
    const auto r = metrics(pairs);
    check(r.counts.tp == c.tp && r.counts.fp == c.fp && r.counts.tn == c.tn && r.counts.fn == c.fn,
          "confusion counts");
    const double hr = c.tn + c.fp ? 100.0 * c.tn / (c.tn + c.fp) : 0.0;
    const double mr = c.tp + c.fn ? 100.0 * c.tp / (c.tp + c.fn) : 0.0;
    const double f1 = 2 * c.tp + c.fp + c.fn ? 100.0 * (2 * c.tp) / (2 * c.tp + c.fp + c.fn) : 0.0;
    check(r.human_rec == hr && r.machine_rec == mr && r.f1 == f1, "rates differ from oracle");
    check(r.avg_rec == (hr + mr) / 2, "AvgRec != mean of recalls");
  }

  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<std::pair<double, Label>> raw;
    std::vector<ScoredLabel> scored;
    for (std::size_t i = 0; i < n; ++i) {
      const Label g = i == 0 ? Label::Human : i == 1 ? Label::LM : (rng() % 2 ? Label::LM : Label::Human);
      // Coarse grid so that ties are common.
      const double s = static_cast<double>(rng() % 15) / 4.0 - 1.0;
      raw.emplace_back(s, g);
      scored.push_back({s, g});
    }
    const auto [t, jv] = oracle::youden_sweep(raw);
    const auto got = youden(scored);
    check(got.threshold == t, "Youden threshold differs from sweep");
    check(std::abs(got.j - jv) <= 1e-12, "Youden J differs from sweep");
  }

  const std::vector<std::pair<Label, Label>> hand = {
      {Label::Human, Label::Human}, {Label::Human, Label::LM}, {Label::LM, Label::LM}, {Label::LM, Label::LM}};
  const auto r = metrics(hand);
  check(round1(r.f1) == 80.0, "hand case F1 != 80.0");
  check(round1(r.avg_rec) == 75.0, "hand case AvgRec != 75.0");
}

// --- 5 ----------------------------------------------------------------------

void stat_oracles() {
  const auto tiny = train_ngram({"a b a b"}, 2, 1.0);
  const std::vector<NgramLm::TokenId> ctx{tiny.id_of("a")};
  check(std::abs(tiny.prob(ctx, tiny.id_of("b")) - 0.5) <= 1e-12, "P(b|a) != 0.5");

  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"the", "cat", "sat", "on", "a", "mat", "dog", "ran", "far", "home"};
  auto text = [&](std::size_t max_len) {
    std::string s;
    const std::size_t n = 1 + rng() % max_len;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return s;
  };
  std::vector<std::string> train;
  for (int i = 0; i < 40; ++i) train.push_back(text(15));
  const auto lm = train_ngram(train, 2, 1.0);
  const oracle::BigramOracle brute(train, 1.0);
  for (int i = 0; i < 100; ++i) {
    auto t = text(50);
    if (i % 10 == 0) t += " zebra";  // out of vocabulary
    check(std::abs(score_log_prob(lm, t) - brute.log_prob(t)) <= 1e-9, "log_prob: " + t);
    check(std::abs(score_rank(lm, t) - brute.rank(t)) <= 1e-9, "rank: " + t);
    check(std::abs(score_log_rank(lm, t) - brute.log_rank(t)) <= 1e-9, "log_rank: " + t);
    check(std::abs(score_entropy(lm, t) - brute.entropy(t)) <= 1e-9, "entropy: " + t);
  }

  const std::string t = "the cat sat on a mat and the dog ran far home";
  const auto toks = split_words(t);
  const Lexicon identity = [&](std::size_t pos, Rng&) { return toks[pos]; };
  check(detectgpt_score(lm, t, {10, 0.3, 9}, identity) == 0.0, "identity perturbation not exactly 0");
}

// --- 6 ----------------------------------------------------------------------

const char* kPipelineScript =
    R"({"match":{"kind":"suffix","pattern":".. Answer: "},"response":"LM"})"
    "\n"
    R"({"match":{"kind":"suffix","pattern":"Answer: "},"response":"Human"})"
    "\n"
    R"({"match":{"kind":"suffix","pattern":"Essay: "},"response":"honestly i reckon this topic matters to me"})"
    "\n";

void write_report(const fs::path& p, const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& r : reports) doc.push_back(to_json(r));
  std::ofstream(p, std::ios::binary) << doc.dump(2) << '\n';
}

// Runs attack -> detect (j = 3) -> evaluate in both modes; returns the
// concatenated bytes of every output file.
std::string run_pipeline(const fs::path& dir, int jobs) {
  using outfox::testing::read_file;
  const auto all = outfox::testing::toy_triplets(60);
  const Corpus train(std::vector<EssayTriplet>(all.begin(), all.begin() + 30));
  const Corpus valid(std::vector<EssayTriplet>(all.begin() + 30, all.begin() + 40));
  const Corpus test(std::vector<EssayTriplet>(all.begin() + 40, all.end()));
  std::istringstream script(kPipelineScript);
  MockBackend mock(read_script(script));
  RecordingBackend backend(mock);

  DetectorConfig plain;
  plain.k = 5;
  plain.j = 0;
  plain.seed = 11;
  OutfoxDetector unaware(train, plain, backend);
  AttackerConfig acfg;
  acfg.seed = 11;

  // Attacked essays for training problems (in-context pool) and for the 20 test problems.
  auto train_att = batch_attack(train, unaware.tfidf(), train.triplets(), unaware, backend, acfg, {false, jobs});
  auto test_att = batch_attack(train, unaware.tfidf(), test.triplets(), unaware, backend, acfg, {false, jobs});
  check(test_att.essays.size() == 20 && test_att.failures.empty(), "attack did not cover 20 problems");
  save_jsonl((dir / "attacked.jsonl").string(), test_att.essays);

  DetectorConfig aware = plain;
  aware.j = 3;
  OutfoxDetector detector(train, aware, backend, make_attacked_pool(train_att.essays));
  LabelDetectorHandle handle{"outfox", [&](const EvalItem& it) {
                               return detector.predict(it.problem_statement, it.text, it.problem_id);
                             }};
  std::vector<EvalReport> outfox_reports;
  for (const auto& mode : {EvalMode::non_attacked(), EvalMode::attacked_by("outfox")}) {
    auto res = evaluate(handle, build_eval_items(test, mode, test_att.essays), mode, jobs);
    std::vector<DetectionRecord> recs;
    for (const auto& p : res.predictions) recs.push_back({p.essay_id, p.gold, p.pred, aware.k, aware.j, aware.seed});
    save_detections((dir / ("pred_" + mode.name() + ".jsonl")).string(), recs);
    outfox_reports.push_back(res.report);
  }
  check(!outfox_reports[1].threshold && !outfox_reports[0].threshold, "label detector carries a threshold");
  write_report(dir / "report_outfox.json", outfox_reports);

  std::vector<std::string> lm_texts;
  for (const auto& t : train.triplets()) lm_texts.push_back(t.lm_essay);
  const auto lm = train_ngram(lm_texts, 2, 1.0);
  StatDetector scorer(lm, StatMethod::LogProb);
  ScoreDetectorHandle stat{"log_prob", [&](const EvalItem& it) { return scorer(it.text); }};
  const auto fitted = fit_threshold(stat, build_eval_items(valid, EvalMode::non_attacked()), jobs);
  std::vector<EvalReport> stat_reports;
  for (const auto& mode : {EvalMode::non_attacked(), EvalMode::attacked_by("outfox")})
    stat_reports.push_back(
        evaluate(stat, build_eval_items(test, mode, test_att.essays), mode, fitted.threshold, jobs).report);
  const auto j0 = to_json(stat_reports[0]), j1 = to_json(stat_reports[1]);
  check(j0["threshold"].is_number() && j0["threshold"] == j1["threshold"], "threshold differs between modes");
  write_report(dir / "report_log_prob.json", stat_reports);

  backend.write_transcript((dir / "transcript.jsonl").string());
  std::string bytes;
  for (const char* f : {"attacked.jsonl", "pred_non_attacked.jsonl", "pred_attacked.jsonl", "report_outfox.json",
                        "report_log_prob.json", "transcript.jsonl"})
    bytes += std::string(f) + "\n" + read_file(dir / f);
  return bytes;
}

void end_to_end() {
  const auto a = run_pipeline(outfox::testing::temp_dir("acceptance_run_a"), 1);
  const auto b = run_pipeline(outfox::testing::temp_dir("acceptance_run_b"), 4);
  check(a == b, "pipeline outputs differ between runs");
}

// --- 7 ----------------------------------------------------------------------

void directional_sanity() {
  // A peaked "machine" source: each word is usually followed by its successor.
  const std::vector<std::string> words = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot",
                                          "golf",  "hotel", "india",   "juliet"};
  std::mt19937_64 rng(7);
  std::vector<std::string> train;
  for (int i = 0; i < 300; ++i) {
    std::size_t w = rng() % words.size();
    std::string s;
    for (int t = 0; t < 20; ++t) {
      s += (t ? " " : "") + words[w];
      w = rng() % 10 < 9 ? (w + 1) % words.size() : rng() % words.size();
    }
    train.push_back(s);
  }
  const auto lm = train_ngram(train, 2, 1.0);

  // Human texts share no vocabulary with the LM's training data.
  const std::vector<std::string> human_words = {"river", "mountain", "breeze", "lantern", "orchard",
                                                "pebble", "meadow", "harbor", "thistle", "canyon"};
  // Samples shorter than the human texts are redrawn so both sides average
  // over comparable token counts.
  Rng sampler(99);
  auto machine_text = [&] {
    std::string s;
    while (split_words(s).size() < 15) s = lm.sample(sampler, 40);
    return s;
  };
  auto human_text = [&] {
    std::string s;
    for (int t = 0; t < 20; ++t) s += (t ? " " : "") + human_words[rng() % human_words.size()];
    return s;
  };
  auto scored_set = [&](std::size_t n) {
    std::vector<ScoredLabel> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({score_log_prob(lm, machine_text()), Label::LM});
      out.push_back({score_log_prob(lm, human_text()), Label::Human});
    }
    return out;
  };
  const auto valid = scored_set(100);
  const double t = youden_threshold(valid);
  const auto test = scored_set(200);
  std::vector<std::pair<Label, Label>> pairs;
  for (const auto& s : test) pairs.emplace_back(s.gold, s.score >= t ? Label::LM : Label::Human);
  const auto r = metrics(pairs);
  check(r.machine_rec >= 95.0, "MachineRec " + std::to_string(r.machine_rec) + " < 95");
  check(r.human_rec >= 95.0, "HumanRec " + std::to_string(r.human_rec) + " < 95");
}

// --- 8 ----------------------------------------------------------------------

void live_smoke() {
  const char* url = std::getenv("OUTFOX_API_URL");
  const char* key = std::getenv("OUTFOX_API_KEY");
  if (!url || !*url || !key || !*key) throw Skip{"OUTFOX_API_URL / OUTFOX_API_KEY not set"};

  HttpBackend http(http_config_from_env());
  RecordingBackend recorder(http);
  const auto train = outfox::testing::toy_corpus(6);
  DetectorConfig dcfg;
  dcfg.k = 1;
  dcfg.j = 0;
  OutfoxDetector detector(train, dcfg, recorder);
  AttackerConfig acfg;
  acfg.k = 1;
  const auto& target = train[0];

  const Label live_label = detector.predict(target.problem_statement, target.lm_essay);
  const auto ctx = build_attack_context(detector.train(), detector.tfidf(), target, detector, acfg);
  const auto live_attack = attack(recorder, ctx, target, acfg);
  check(!live_attack.text.empty(), "empty attack completion");

  ReplayBackend replay(recorder.transcript());
  OutfoxDetector offline(train, dcfg, replay);
  check(offline.predict(target.problem_statement, target.lm_essay) == live_label, "replayed label differs");
  const auto ctx2 = build_attack_context(offline.train(), offline.tfidf(), target, offline, acfg);
  check(attack(replay, ctx2, target, acfg).text == live_attack.text, "replayed attack differs");
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<void()> run;
};

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria = {
      {1, "prompt fidelity (golden files)", 1.0, prompt_fidelity},
      {2, "cardinality of R_det and R_atk", 5.0, cardinality},
      {3, "retrieval equals brute-force ranking", 30.0, retrieval_oracle},
      {4, "metrics and Youden threshold oracles", 10.0, metric_oracles},
      {5, "statistical detector oracles", 30.0, stat_oracles},
      {6, "end-to-end determinism with mock backend", 10.0, end_to_end},
      {7, "directional sanity on separable corpus", 30.0, directional_sanity},
      {8, "live backend smoke with record/replay", 120.0, live_smoke},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string status = "PASS", detail;
    try {
      c.run();
    } catch (const Skip& s) {
      status = "SKIP";
      detail = s.why;
    } catch (const std::exception& e) {
      status = "FAIL";
      detail = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (status == "PASS" && secs > c.budget_s) {
      status = "FAIL";
      detail = "over budget of " + std::to_string(c.budget_s) + " s";
    }
    failures += status == "FAIL";
    std::printf("%s criterion %d: %s (%.3f s)%s%s\n", status.c_str(), c.id, c.name.c_str(), secs,
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
