// outfox: command-line driver for ingest -> attack -> detect -> evaluate -> analyze.
//
// Every subcommand writes a manifest next to its primary output with the
// effective settings, seeds, and input/output digests.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "outfox/http_backend.hpp"
#include "outfox/outfox.hpp"

namespace fs = std::filesystem;
using namespace outfox;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kUsage = 2;
constexpr int kPartial = 3;

class UsageError : public Error {
  using Error::Error;
};

struct Globals {
  std::string config_path;
  int jobs = 1;
  std::string log_level = "warn";
  KeyValueConfig config;
};

// Flag value if given, else config-file value, else the built-in default
// already held in `value`.
template <typename T>
void apply_config(const CLI::Option* opt, T& value, const KeyValueConfig& cfg, const std::string& key) {
  if (opt && opt->count() > 0) return;
  if constexpr (std::is_same_v<T, bool>)
    value = cfg.get_bool(key, value);
  else if constexpr (std::is_integral_v<T>)
    value = static_cast<T>(cfg.get_int(key, static_cast<long long>(value)));
  else if constexpr (std::is_floating_point_v<T>)
    value = static_cast<T>(cfg.get_double(key, value));
  else
    value = cfg.get_string(key, value);
}

// --- backend selection ------------------------------------------------------

struct BackendOptions {
  std::string kind = "mock";
  std::string script;
  std::string default_response;
  bool has_default = false;
  std::string replay;
  std::string transcript;
  std::string record_script;
  std::string model = "gpt-3.5-turbo";
  int max_retries = 5;
  int requests_per_minute = 0;
  double timeout = 60.0;
};

void add_backend_options(CLI::App* cmd, BackendOptions& o) {
  cmd->add_option("--backend", o.kind, "mock | http | replay")
      ->check(CLI::IsMember({"mock", "http", "replay"}));
  cmd->add_option("--script", o.script, "mock script JSONL");
  cmd->add_option("--default-response", o.default_response, "mock response when no rule matches");
  cmd->add_option("--replay", o.replay, "transcript JSONL to replay");
  cmd->add_option("--transcript", o.transcript, "where to write the call transcript");
  cmd->add_option("--record-script", o.record_script, "also write an exact-match mock script");
}

struct BackendStack {
  std::unique_ptr<CompletionBackend> inner;
  std::unique_ptr<RecordingBackend> recorder;
  HttpBackend* http = nullptr;
  CompletionBackend& get() { return *recorder; }
};

BackendStack make_backend(BackendOptions& o, CLI::App* cmd, const Globals& g, Manifest& m) {
  apply_config(cmd->get_option_no_throw("--backend"), o.kind, g.config, "backend.kind");
  apply_config(nullptr, o.model, g.config, "backend.model");
  apply_config(nullptr, o.max_retries, g.config, "backend.max_retries");
  apply_config(nullptr, o.requests_per_minute, g.config, "backend.requests_per_minute");
  apply_config(nullptr, o.timeout, g.config, "backend.timeout_seconds");
  o.has_default = cmd->get_option("--default-response")->count() > 0;

  BackendStack s;
  if (o.kind == "mock") {
    if (o.script.empty()) throw UsageError("--backend mock requires --script");
    s.inner = std::make_unique<MockBackend>(
        load_script(o.script), o.has_default ? std::optional(o.default_response) : std::nullopt);
    m.input(o.script);
  } else if (o.kind == "replay") {
    if (o.replay.empty()) throw UsageError("--backend replay requires --replay");
    s.inner = std::make_unique<ReplayBackend>(load_transcript(o.replay));
    m.input(o.replay);
  } else {
    HttpConfig cfg = http_config_from_env();
    cfg.model = o.model;
    cfg.max_retries = o.max_retries;
    cfg.requests_per_minute = o.requests_per_minute;
    cfg.timeout_seconds = o.timeout;
    cfg.max_in_flight = std::max(1, g.jobs);
    auto http = std::make_unique<HttpBackend>(cfg);
    s.http = http.get();
    s.inner = std::move(http);
    m.setting("backend.model", o.model);
  }
  m.setting("backend.kind", o.kind);
  s.recorder = std::make_unique<RecordingBackend>(*s.inner);
  return s;
}

void finish_backend(BackendStack& s, const BackendOptions& o, const std::string& out, Manifest& m) {
  const std::string transcript = o.transcript.empty() ? out + ".transcript.jsonl" : o.transcript;
  s.recorder->write_transcript(transcript);
  m.output(transcript);
  if (!o.record_script.empty()) {
    s.recorder->write_script(o.record_script);
    m.output(o.record_script);
  }
  m.note("backend_calls", s.recorder->calls());
  if (s.http) m.note("top_p_clamped", s.http->top_p_clamped());
}

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

Corpus load_with_attacked(const std::string& corpus_path, const std::string& attacked_path) {
  auto corpus = load_corpus(corpus_path);
  if (attacked_path.empty()) return corpus;
  auto attacked = load_attacked(attacked_path);
  validate_attacked(corpus, attacked);
  return corpus.with_attacked(std::move(attacked));
}

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string out;
  std::string split = "14400,500,500";
  std::int64_t seed = 0;
};

int run_ingest(IngestArgs& a, CLI::App* cmd, const Globals& g) {
  apply_config(cmd->get_option("--split"), a.split, g.config, "ingest.split");
  apply_config(cmd->get_option("--seed"), a.seed, g.config, "ingest.seed");
  const auto sizes = parse_split_sizes(a.split);
  Manifest m("ingest");
  m.setting("split", a.split);
  m.seed("split", a.seed);
  m.input(a.input);
  auto corpus = load_corpus(a.input);
  auto parts = split(corpus, sizes, a.seed);
  fs::create_directories(a.out);
  const std::pair<const char*, const Corpus*> files[] = {
      {"train.jsonl", &parts.train}, {"valid.jsonl", &parts.valid}, {"test.jsonl", &parts.test}};
  for (const auto& [name, part] : files) {
    const auto path = (fs::path(a.out) / name).string();
    save_corpus(path, *part);
    m.output(path);
  }
  m.write((fs::path(a.out) / "manifest.json").string());
  std::cout << "train " << parts.train.size() << ", valid " << parts.valid.size() << ", test "
            << parts.test.size() << "\n";
  return kOk;
}

// --- attack -----------------------------------------------------------------

struct AttackArgs {
  std::string train;
  std::string test;
  std::string out;
  std::size_t k = 10;
  std::size_t detector_k = 5;
  std::int64_t seed = 0;
  double temperature = 1.3;
  std::string tag = "outfox";
  bool continue_on_error = false;
  std::string failures;
  BackendOptions backend;
};

int run_attack(AttackArgs& a, CLI::App* cmd, const Globals& g) {
  apply_config(cmd->get_option("--k"), a.k, g.config, "attacker.k");
  apply_config(cmd->get_option("--detector-k"), a.detector_k, g.config, "attacker.detector_k");
  apply_config(cmd->get_option("--seed"), a.seed, g.config, "attacker.seed");
  apply_config(cmd->get_option("--temperature"), a.temperature, g.config, "attacker.temperature");
  Manifest m("attack");
  auto backend = make_backend(a.backend, cmd, g, m);

  auto train = load_corpus(a.train);
  auto test = load_corpus(a.test);
  m.input(a.train);
  m.input(a.test);
  DetectorConfig dcfg;
  dcfg.k = a.detector_k;
  dcfg.j = 0;
  dcfg.seed = a.seed;
  AttackerConfig acfg;
  acfg.k = a.k;
  acfg.seed = a.seed;
  acfg.params.temperature = a.temperature;
  acfg.tag = a.tag;
  m.setting("attacker.k", a.k);
  m.setting("attacker.temperature", a.temperature);
  m.setting("attacker.tag", a.tag);
  m.setting("detector", to_json(dcfg));
  m.setting("retrieval", "tfidf unigrams, no stop words");
  m.seed("attack", a.seed);

  OutfoxDetector detector(train, dcfg, backend.get());
  auto result = batch_attack(detector.train(), detector.tfidf(), test.triplets(), detector, backend.get(),
                             acfg, {a.continue_on_error, g.jobs});
  save_jsonl(a.out, result.essays);
  m.output(a.out);
  finish_backend(backend, a.backend, a.out, m);
  int code = kOk;
  if (!result.failures.empty()) {
    const std::string sidecar = a.failures.empty() ? a.out + ".failures.jsonl" : a.failures;
    save_failures(sidecar, result.failures);
    m.output(sidecar);
    std::cerr << result.failures.size() << " problem(s) failed; see " << sidecar << "\n";
    code = kPartial;
  }
  m.write(manifest_path(a.out));
  std::cout << "attacked " << result.essays.size() << " of " << test.size() << " problems\n";
  return code;
}

// --- detect -----------------------------------------------------------------

struct DetectArgs {
  std::string train;
  std::string target;
  std::string out;
  std::size_t k = 5;
  std::size_t j = 3;
  std::int64_t seed = 0;
  bool example_shuffle = true;
  std::string attacked;
  std::string mode = "non_attacked";
  std::string target_attacked;
  std::string attacker_tag = "outfox";
  bool generate_missing = false;
  BackendOptions backend;
};

int run_detect(DetectArgs& a, CLI::App* cmd, const Globals& g) {
  apply_config(cmd->get_option("--k"), a.k, g.config, "detector.k");
  apply_config(cmd->get_option("--j"), a.j, g.config, "detector.j");
  apply_config(cmd->get_option("--seed"), a.seed, g.config, "detector.seed");
  apply_config(cmd->get_option("--example-shuffle"), a.example_shuffle, g.config, "detector.example_shuffle");
  if (a.j > 0 && a.attacked.empty() && !a.generate_missing)
    throw UsageError("--j " + std::to_string(a.j) + " needs --attacked (or --generate-missing-attacks)");
  if (a.mode == "attacked" && a.target_attacked.empty())
    throw UsageError("--mode attacked needs --target-attacked");

  Manifest m("detect");
  auto backend = make_backend(a.backend, cmd, g, m);
  auto train = load_corpus(a.train);
  auto target = load_corpus(a.target);
  m.input(a.train);
  m.input(a.target);
  AttackedPool pool;
  if (!a.attacked.empty()) {
    auto att = load_attacked(a.attacked);
    validate_attacked(train, att);
    pool = make_attacked_pool(att);
    m.input(a.attacked);
  }
  std::vector<AttackedEssay> target_att;
  if (!a.target_attacked.empty()) {
    target_att = load_attacked(a.target_attacked);
    validate_attacked(target, target_att);
    m.input(a.target_attacked);
  }

  DetectorConfig cfg;
  cfg.k = a.k;
  cfg.j = a.j;
  cfg.seed = a.seed;
  cfg.example_shuffle = a.example_shuffle;
  m.setting("detector", to_json(cfg));
  m.setting("mode", a.mode);
  m.setting("retrieval", "tfidf unigrams, no stop words");
  m.seed("detector", a.seed);

  OutfoxDetector detector(train, cfg, backend.get(), pool);
  std::optional<OutfoxDetector> plain;
  PredictionCache cache;
  OnceMap<AttackedEssay> generated;
  if (a.generate_missing) {
    DetectorConfig plain_cfg = cfg;
    plain_cfg.j = 0;
    plain.emplace(detector.with_config(plain_cfg));
    AttackerConfig acfg;
    acfg.seed = a.seed;
    acfg.tag = a.attacker_tag;
    acfg.k = std::min<std::size_t>(acfg.k, train.size() - 1);
    detector.set_attack_on_demand([&](const EssayTriplet& t) {
      return generated.get_or_compute(t.id, [&] {
        auto ctx = build_attack_context(plain->train(), plain->tfidf(), t, *plain, acfg, &cache);
        return attack(backend.get(), ctx, t, acfg);
      });
    });
    m.setting("generate_missing_attacks", true);
  }

  const EvalMode mode = a.mode == "attacked" ? EvalMode::attacked_by(a.attacker_tag) : EvalMode::non_attacked();
  const auto items = build_eval_items(target, mode, target_att);
  std::vector<DetectionRecord> records(items.size());
  std::atomic<int> unparseable{0};
  auto errors = parallel_for(items.size(), g.jobs, [&](std::size_t i) {
    const auto& it = items[i];
    Label pred = Label::Human;
    try {
      pred = detector.predict(it.problem_statement, it.text, it.problem_id);
    } catch (const UnparseableLabelError& e) {
      ++unparseable;
      spdlog::warn("{}: {} (counted as Human)", it.essay_id, e.what());
    }
    records[i] = {it.essay_id, it.gold, pred, cfg.k, cfg.j, cfg.seed};
  });
  rethrow_first(errors);
  save_detections(a.out, records);
  m.output(a.out);
  m.note("unparseable_as_human", unparseable.load());
  if (a.generate_missing) m.note("generated_attacks", generated.size());
  finish_backend(backend, a.backend, a.out, m);
  m.write(manifest_path(a.out));
  std::cout << "wrote " << records.size() << " predictions\n";
  return kOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> pred;
  std::string method;
  std::string lm_train;
  std::string valid;
  std::string test;
  std::string mode = "both";
  std::string attacked;
  std::string attacker_tag = "outfox";
  std::string report;
  std::string csv;
  int ngram_n = 2;
  double ngram_alpha = 1.0;
  int n_perturbations = 10;
  double mask_fraction = 0.15;
  std::int64_t seed = 0;
};

void write_reports(const std::vector<EvalReport>& reports, const std::string& report_path,
                   const std::string& csv_path, Manifest& m) {
  nlohmann::ordered_json doc;
  if (reports.size() == 1) {
    doc = to_json(reports[0]);
  } else {
    doc = nlohmann::ordered_json::array();
    for (const auto& r : reports) doc.push_back(to_json(r));
  }
  {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + report_path);
    out << doc.dump(2) << '\n';
  }
  m.output(report_path);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    out << csv_header() << '\n';
    for (const auto& r : reports) out << to_csv_row(r) << '\n';
    out.close();
    m.output(csv_path);
  }
  std::cout << format_table(reports);
}

int run_evaluate(EvaluateArgs& a, CLI::App* cmd, const Globals& g) {
  apply_config(cmd->get_option("--ngram-n"), a.ngram_n, g.config, "ngram.n");
  apply_config(cmd->get_option("--ngram-alpha"), a.ngram_alpha, g.config, "ngram.alpha");
  apply_config(cmd->get_option("--n-perturbations"), a.n_perturbations, g.config, "detectgpt.n_perturbations");
  apply_config(cmd->get_option("--mask-fraction"), a.mask_fraction, g.config, "detectgpt.mask_fraction");
  apply_config(cmd->get_option("--seed"), a.seed, g.config, "detectgpt.seed");
  Manifest m("evaluate");
  std::vector<EvalReport> reports;

  if (!a.pred.empty()) {
    if (!a.method.empty()) throw UsageError("use either --pred or --method, not both");
    for (const auto& path : a.pred) {
      auto recs = load_detections(path);
      m.input(path);
      std::vector<std::pair<Label, Label>> pairs;
      bool attacked = false;
      for (const auto& r : recs) {
        pairs.emplace_back(r.gold, r.pred);
        attacked = attacked || r.essay_id.find(":attacked:") != std::string::npos;
      }
      auto report = metrics(pairs);
      report.metadata["detector"] = "outfox";
      report.metadata["attacker"] = attacked ? a.attacker_tag : std::string("none");
      report.metadata["mode"] = attacked ? "attacked" : "non_attacked";
      if (!recs.empty()) {
        report.metadata["k"] = recs[0].k;
        report.metadata["j"] = recs[0].j;
        report.metadata["seeds"] = {{"detector", recs[0].seed}};
      }
      reports.push_back(std::move(report));
    }
  } else {
    if (a.method.empty()) throw UsageError("evaluate needs --pred or --method");
    if (a.lm_train.empty() || a.valid.empty() || a.test.empty())
      throw UsageError("--method needs --lm-train, --valid and --test");
    if (a.mode != "non_attacked" && a.attacked.empty())
      throw UsageError("--mode " + a.mode + " needs --attacked");
    const auto method = stat_method_from_string(a.method);
    auto lm_corpus = load_corpus(a.lm_train);
    auto valid = load_corpus(a.valid);
    auto test = load_corpus(a.test);
    m.input(a.lm_train);
    m.input(a.valid);
    m.input(a.test);
    std::vector<std::string> lm_texts;
    for (const auto& t : lm_corpus.triplets()) lm_texts.push_back(t.lm_essay);
    auto lm = train_ngram(lm_texts, a.ngram_n, a.ngram_alpha);
    StatDetector scorer(lm, method, {a.n_perturbations, a.mask_fraction, a.seed});
    ScoreDetectorHandle handle{std::string(to_string(method)),
                               [&](const EvalItem& it) { return scorer(it.text); }};
    m.setting("method", a.method);
    m.setting("ngram.n", a.ngram_n);
    m.setting("ngram.alpha", a.ngram_alpha);
    m.setting("aggregation", "mean per token");
    if (method == StatMethod::DetectGpt) {
      m.setting("detectgpt.n_perturbations", a.n_perturbations);
      m.setting("detectgpt.mask_fraction", a.mask_fraction);
      m.seed("detectgpt", a.seed);
    }

    const auto fitted = fit_threshold(handle, build_eval_items(valid, EvalMode::non_attacked()), g.jobs);
    m.note("youden_j", fitted.j);
    std::vector<AttackedEssay> attacked;
    if (!a.attacked.empty()) {
      attacked = load_attacked(a.attacked);
      validate_attacked(test, attacked);
      m.input(a.attacked);
    }
    std::vector<EvalMode> modes;
    if (a.mode == "non_attacked" || a.mode == "both") modes.push_back(EvalMode::non_attacked());
    if (a.mode == "attacked" || a.mode == "both") modes.push_back(EvalMode::attacked_by(a.attacker_tag));
    for (const auto& mode : modes) {
      auto r = evaluate(handle, build_eval_items(test, mode, attacked), mode, fitted.threshold, g.jobs);
      r.report.metadata["config_hash"] = m.config_hash();
      reports.push_back(std::move(r.report));
    }
  }
  write_reports(reports, a.report, a.csv, m);
  m.write(manifest_path(a.report));
  return kOk;
}

// --- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
  std::string corpus;
  std::string attacked;
  std::string attacker_tag = "outfox";
  std::string embedder = "tfidf";
  std::string out;
  std::size_t bins = 20;
};

int run_analyze(AnalyzeArgs& a, CLI::App* cmd, const Globals& g) {
  apply_config(cmd->get_option("--bins"), a.bins, g.config, "analysis.bins");
  Manifest m("analyze");
  auto corpus = load_corpus(a.corpus);
  auto attacked = load_attacked(a.attacked);
  if (attacked.empty()) throw ArgumentError("attacked file " + a.attacked + " is empty");
  validate_attacked(corpus, attacked);
  m.input(a.corpus);
  m.input(a.attacked);
  m.setting("embedder", a.embedder);
  m.setting("bins", a.bins);
  m.setting("pairing", "per problem");

  std::vector<std::string> fit_texts;
  for (const auto& t : corpus.triplets()) {
    fit_texts.push_back(t.human_essay);
    fit_texts.push_back(t.lm_essay);
  }
  for (const auto& e : attacked) fit_texts.push_back(e.text);
  TfidfEmbedder embedder(fit_texts);

  auto lm_sims = similarity_values(pairwise_similarities(corpus, {}, attacked, embedder));
  auto att_sims = similarity_values(pairwise_similarities(corpus, {a.attacker_tag}, attacked, embedder));
  const auto lo = std::min(*std::min_element(lm_sims.begin(), lm_sims.end()),
                           *std::min_element(att_sims.begin(), att_sims.end()));
  const auto hi = std::max(*std::max_element(lm_sims.begin(), lm_sims.end()),
                           *std::max_element(att_sims.begin(), att_sims.end()));
  auto lm_sum = distribution_summary(lm_sims, a.bins, std::pair{lo, hi});
  auto att_sum = distribution_summary(att_sims, a.bins, std::pair{lo, hi});

  fs::create_directories(a.out);
  const auto hist_path = (fs::path(a.out) / "histogram.csv").string();
  {
    std::ofstream out(hist_path, std::ios::binary);
    out << "bin_left,bin_right,count,side\n";
    auto emit = [&](const DistributionSummary& s, const char* side) {
      for (const auto& b : s.histogram) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%zu,%s\n", b.left, b.right, b.count, side);
        out << buf;
      }
    };
    emit(lm_sum, "non_attacked");
    emit(att_sum, "attacked");
  }
  const auto summary_path = (fs::path(a.out) / "summary.json").string();
  {
    nlohmann::ordered_json j;
    j["non_attacked"] = {{"n", lm_sum.n}, {"mean", lm_sum.mean}, {"median", lm_sum.median}};
    j["attacked"] = {{"n", att_sum.n}, {"mean", att_sum.mean}, {"median", att_sum.median}};
    j["delta_mean"] = delta_mean(att_sum, lm_sum);
    std::ofstream out(summary_path, std::ios::binary);
    out << j.dump(2) << '\n';
  }
  m.output(hist_path);
  m.output(summary_path);
  m.write((fs::path(a.out) / "manifest.json").string());
  std::printf("non-attacked mean %.4f, attacked mean %.4f, delta %.4f\n", lm_sum.mean, att_sum.mean,
              delta_mean(att_sum, lm_sum));
  return kOk;
}

// --- debug helpers ----------------------------------------------------------

struct RetrieveArgs {
  std::string corpus;
  std::string query;
  std::size_t k = 5;
};

int run_retrieve(const RetrieveArgs& a) {
  auto corpus = load_corpus(a.corpus);
  auto model = fit_tfidf(corpus.problem_statements());
  const auto q = model.transform(a.query);
  std::cout << "rank,index,id,similarity,closeness\n";
  const auto hits = top_k_closest(model, a.query, a.k);
  for (std::size_t r = 0; r < hits.size(); ++r) {
    const double s = cosine_similarity(q, model.doc_vectors()[hits[r]]);
    std::printf("%zu,%zu,%s,%.6f,%.6f\n", r + 1, hits[r], corpus[hits[r]].id.c_str(), s, 1.0 - s);
  }
  return kOk;
}

struct ScoreArgs {
  std::string method = "log_prob";
  std::string lm_train;
  std::string input;
  std::string out;
  int ngram_n = 2;
  double ngram_alpha = 1.0;
  int n_perturbations = 10;
  double mask_fraction = 0.15;
  std::int64_t seed = 0;
};

int run_score(ScoreArgs& a, CLI::App* cmd, const Globals& g) {
  apply_config(cmd->get_option("--ngram-n"), a.ngram_n, g.config, "ngram.n");
  apply_config(cmd->get_option("--ngram-alpha"), a.ngram_alpha, g.config, "ngram.alpha");
  apply_config(cmd->get_option("--n-perturbations"), a.n_perturbations, g.config, "detectgpt.n_perturbations");
  apply_config(cmd->get_option("--mask-fraction"), a.mask_fraction, g.config, "detectgpt.mask_fraction");
  const auto method = stat_method_from_string(a.method);
  auto lm_corpus = load_corpus(a.lm_train);
  std::vector<std::string> texts;
  for (const auto& t : lm_corpus.triplets()) texts.push_back(t.lm_essay);
  auto lm = train_ngram(texts, a.ngram_n, a.ngram_alpha);
  StatDetector scorer(lm, method, {a.n_perturbations, a.mask_fraction, a.seed});
  auto items = build_eval_items(load_corpus(a.input), EvalMode::non_attacked());
  std::vector<double> scores(items.size());
  rethrow_first(parallel_for(items.size(), g.jobs, [&](std::size_t i) { scores[i] = scorer(items[i].text); }));
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + a.out);
  out << "essay_id,method,score\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", scores[i]);
    out << items[i].essay_id << ',' << a.method << ',' << buf << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("outfox"));

  CLI::App app{"outfox: in-context machine-text detection and attack"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--jobs", g.jobs, "parallel backend calls")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "validate and split a triplet corpus");
  c_ingest->add_option("--input", ingest.input)->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--out", ingest.out, "output directory")->required();
  c_ingest->add_option("--split", ingest.split, "train,valid,test sizes");
  c_ingest->add_option("--seed", ingest.seed);

  AttackArgs attack_args;
  auto* c_attack = app.add_subcommand("attack", "generate attacked essays for problems");
  c_attack->add_option("--train", attack_args.train)->required()->check(CLI::ExistingFile);
  c_attack->add_option("--test", attack_args.test, "problems to attack")->required()->check(CLI::ExistingFile);
  c_attack->add_option("--out", attack_args.out, "attacked essays JSONL")->required();
  c_attack->add_option("--k", attack_args.k, "attacker in-context examples");
  c_attack->add_option("--detector-k", attack_args.detector_k, "k of the attack-unaware detector");
  c_attack->add_option("--seed", attack_args.seed);
  c_attack->add_option("--temperature", attack_args.temperature);
  c_attack->add_option("--tag", attack_args.tag, "attacker tag written to records");
  c_attack->add_flag("--continue-on-error", attack_args.continue_on_error);
  c_attack->add_option("--failures", attack_args.failures, "failure sidecar JSONL");
  add_backend_options(c_attack, attack_args.backend);

  DetectArgs detect_args;
  auto* c_detect = app.add_subcommand("detect", "classify target essays");
  c_detect->add_option("--train", detect_args.train)->required()->check(CLI::ExistingFile);
  c_detect->add_option("--target", detect_args.target, "test corpus")->required()->check(CLI::ExistingFile);
  c_detect->add_option("--out", detect_args.out, "predictions JSONL")->required();
  c_detect->add_option("--k", detect_args.k);
  c_detect->add_option("--j", detect_args.j, "attacked examples among the k");
  c_detect->add_option("--seed", detect_args.seed);
  c_detect->add_option("--example-shuffle", detect_args.example_shuffle);
  c_detect->add_option("--attacked", detect_args.attacked, "attacked essays for training problems");
  c_detect->add_option("--mode", detect_args.mode)->check(CLI::IsMember({"non_attacked", "attacked"}));
  c_detect->add_option("--target-attacked", detect_args.target_attacked, "attacked essays for target problems");
  c_detect->add_option("--attacker-tag", detect_args.attacker_tag);
  c_detect->add_flag("--generate-missing-attacks", detect_args.generate_missing);
  add_backend_options(c_detect, detect_args.backend);

  EvaluateArgs eval_args;
  auto* c_eval = app.add_subcommand("evaluate", "compute HumanRec/MachineRec/AvgRec/F1");
  c_eval->add_option("--pred", eval_args.pred, "prediction JSONL (repeatable)")->check(CLI::ExistingFile);
  c_eval->add_option("--method", eval_args.method, "log_prob|rank|log_rank|entropy|detectgpt");
  c_eval->add_option("--lm-train", eval_args.lm_train, "corpus whose machine essays train the n-gram LM");
  c_eval->add_option("--valid", eval_args.valid, "validation corpus for the threshold");
  c_eval->add_option("--test", eval_args.test);
  c_eval->add_option("--mode", eval_args.mode)->check(CLI::IsMember({"non_attacked", "attacked", "both"}));
  c_eval->add_option("--attacked", eval_args.attacked, "attacked essays for test problems");
  c_eval->add_option("--attacker-tag", eval_args.attacker_tag);
  c_eval->add_option("--report", eval_args.report, "report JSON")->required();
  c_eval->add_option("--csv", eval_args.csv, "optional CSV rows");
  c_eval->add_option("--ngram-n", eval_args.ngram_n);
  c_eval->add_option("--ngram-alpha", eval_args.ngram_alpha);
  c_eval->add_option("--n-perturbations", eval_args.n_perturbations);
  c_eval->add_option("--mask-fraction", eval_args.mask_fraction);
  c_eval->add_option("--seed", eval_args.seed);

  AnalyzeArgs analyze_args;
  auto* c_analyze = app.add_subcommand("analyze", "similarity of machine essays to human essays");
  c_analyze->add_option("--corpus", analyze_args.corpus)->required()->check(CLI::ExistingFile);
  c_analyze->add_option("--attacked", analyze_args.attacked)->required()->check(CLI::ExistingFile);
  c_analyze->add_option("--attacker-tag", analyze_args.attacker_tag);
  c_analyze->add_option("--embedder", analyze_args.embedder)->check(CLI::IsMember({"tfidf"}));
  c_analyze->add_option("--bins", analyze_args.bins);
  c_analyze->add_option("--out", analyze_args.out, "output directory")->required();

  RetrieveArgs retrieve_args;
  auto* c_retrieve = app.add_subcommand("retrieve", "print the top-k closest problems as CSV");
  c_retrieve->add_option("--corpus", retrieve_args.corpus)->required()->check(CLI::ExistingFile);
  c_retrieve->add_option("--query", retrieve_args.query)->required();
  c_retrieve->add_option("--k", retrieve_args.k);

  ScoreArgs score_args;
  auto* c_score = app.add_subcommand("score", "write statistical detector scores as CSV");
  c_score->add_option("--method", score_args.method);
  c_score->add_option("--lm-train", score_args.lm_train)->required()->check(CLI::ExistingFile);
  c_score->add_option("--input", score_args.input)->required()->check(CLI::ExistingFile);
  c_score->add_option("--out", score_args.out)->required();
  c_score->add_option("--ngram-n", score_args.ngram_n);
  c_score->add_option("--ngram-alpha", score_args.ngram_alpha);
  c_score->add_option("--n-perturbations", score_args.n_perturbations);
  c_score->add_option("--mask-fraction", score_args.mask_fraction);
  c_score->add_option("--seed", score_args.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(g.log_level));
    if (!g.config_path.empty()) g.config = KeyValueConfig::load(g.config_path);
    if (c_ingest->parsed()) return run_ingest(ingest, c_ingest, g);
    if (c_attack->parsed()) return run_attack(attack_args, c_attack, g);
    if (c_detect->parsed()) return run_detect(detect_args, c_detect, g);
    if (c_eval->parsed()) return run_evaluate(eval_args, c_eval, g);
    if (c_analyze->parsed()) return run_analyze(analyze_args, c_analyze, g);
    if (c_retrieve->parsed()) return run_retrieve(retrieve_args);
    if (c_score->parsed()) return run_score(score_args, c_score, g);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kUsage;
}
