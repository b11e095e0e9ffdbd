// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "depkit/baselines.hpp"
#include "depkit/ensemble.hpp"
#include "depkit/error.hpp"
#include "depkit/experiment.hpp"
#include "depkit/metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace depkit;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

Verdict fusion_oracles() {
  Verdict v;
  std::mt19937_64 rng(20240601);
  double worst_avg = 0.0, worst_bayes = 0.0;
  const auto t0 = Clock::now();
  for (int t = 0; t < 1000; ++t) {
    const std::size_t rows = 1 + rng() % 50;
    const int L = 2 + static_cast<int>(rng() % 4);
    const std::size_t k = 1 + rng() % 4;
    std::vector<ProbabilityMatrix> ms;
    for (std::size_t m = 0; m < k; ++m) ms.push_back(oracle::random_matrix(rng, rows, L));
    const auto uniform = ClassPrior::uniform(L);
    auto avg = average_fuse(ms);
    auto bay = bayes_fuse(ms, uniform);
    worst_avg = std::max(worst_avg, oracle::max_abs_diff(avg.values(), oracle::mean_rows(ms)));
    worst_bayes = std::max(worst_bayes, oracle::max_abs_diff(bay.values(), oracle::product_normalize(ms, uniform.weights())));
    auto perm = ms;
    std::shuffle(perm.begin(), perm.end(), rng);
    v.require(average_fuse(perm) == avg, "averaging changed under member permutation");
    v.require(bayes_fuse(perm, uniform) == bay, "Bayesian fusion changed under member permutation");
  }
  const double secs = seconds_since(t0);
  v.require(worst_avg <= 1e-12, "averaging deviates from the mean oracle");
  v.require(worst_bayes <= 1e-12, "Bayesian fusion deviates from the product oracle");
  v.require(secs < 5.0, "runtime over 5 s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "max |avg - oracle| %.2e, max |bayes - oracle| %.2e, %.2f s", worst_avg, worst_bayes, secs);
  if (v.ok) v.detail = buf;
  else v.detail += std::string(" (") + buf + ")";
  return v;
}

Verdict metric_oracles() {
  Verdict v;
  std::mt19937_64 rng(77);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 200;
    const int L = 2 + static_cast<int>(rng() % 4);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % L);
      pred[i] = static_cast<int>(rng() % L);
    }
    const auto s = score_labels(truth, pred, L);
    const auto o = oracle::weighted_metrics(truth, pred, L);
    worst = std::max({worst, std::abs(s.accuracy - o.accuracy), std::abs(s.precision_w - o.precision),
                      std::abs(s.recall_w - o.recall), std::abs(s.f1_w - o.f1)});
    v.require(std::abs(s.recall_w - s.accuracy) <= 1e-12, "weighted recall differs from accuracy");
  }
  const double secs = seconds_since(t0);
  v.require(worst <= 1e-12, "metrics deviate from the brute-force oracle");
  v.require(secs < 5.0, "runtime over 5 s");
  char buf[120];
  std::snprintf(buf, sizeof buf, "max deviation %.2e, %.2f s", worst, secs);
  if (v.ok) v.detail = buf;
  return v;
}

Verdict worked_example() {
  Verdict v;
  const auto s = weighted_scores(ConfusionMatrix(2, {2, 1, 0, 1}));
  v.require(std::abs(s.f1_w - 0.76667) <= 1e-5, "weighted F1 " + std::to_string(s.f1_w));
  v.require(s.accuracy == 0.75, "accuracy " + std::to_string(s.accuracy));
  char buf[80];
  std::snprintf(buf, sizeof buf, "F1_w %.5f, accuracy %.2f", s.f1_w, s.accuracy);
  if (v.ok) v.detail = buf;
  return v;
}

Verdict majority_baseline(const oracle::TempDir& tmp) {
  Verdict v;
  const std::size_t tr[] = {1659, 5140, 758}, va[] = {312, 879, 143}, te[] = {2306, 1830, 360};
  json ds = fixture::write_count_dataset(tmp / "table1", "reddit", "reddit", tr, va, te);
  auto spec = experiment_from_json({{"datasets", {{"reddit", ds}}},
                                    {"target", "reddit"},
                                    {"model", {{"type", "baseline"}, {"kind", "majority"}}},
                                    {"seeds", {1}}});
  RunContext ctx;
  ctx.cache_root = tmp / "cache";
  auto report = run_experiment(spec, ctx);
  auto run = run_single(spec, 1, ctx);
  const auto label = load_baseline(run.cache_entry / "model").majority_label();
  v.require(label == 1, "majority label " + std::to_string(label));
  const double acc = report.aggregate.mean_accuracy;
  v.require(std::abs(acc - 1830.0 / 4496.0) <= 1e-9, "accuracy " + std::to_string(acc));
  v.require(std::abs(acc - 0.40703) <= 1e-5, "accuracy not 0.40703");
  const bool noted = std::any_of(report.notes.begin(), report.notes.end(),
                                 [](const std::string& n) { return n.find("0.513") != std::string::npos; });
  v.require(noted, "report lacks the note about the 0.513 reference value");
  char buf[100];
  std::snprintf(buf, sizeof buf, "majority label %d, accuracy %.9f, note present", label, acc);
  if (v.ok) v.detail = buf;
  return v;
}

Verdict toy_end_to_end(const oracle::TempDir& tmp) {
  Verdict v;
  const auto t0 = Clock::now();
  json datasets = {{"toy", fixture::write_keyword_dataset(tmp / "toy", "toy", "reddit")}};
  RunContext ctx;
  ctx.cache_root = tmp / "cache";
  double best_member = 0.0;
  double worst_single_acc = 1.0;
  for (const char* enc : {"roberta", "mentalbert", "bertweet"}) {
    json cfg = fixture::encoder_config(datasets, "toy", enc);
    cfg["seeds"] = {1, 2, 3};
    auto report = run_experiment(experiment_from_json(cfg), ctx);
    for (const auto& s : report.aggregate.per_run) worst_single_acc = std::min(worst_single_acc, s.accuracy);
    best_member = std::max(best_member, report.aggregate.mean_f1_w);
  }
  json cfg = fixture::encoder_config(datasets, "toy", "roberta");
  cfg["seeds"] = {1, 2, 3};
  cfg["model"] = {{"type", "ensemble"}, {"combo", "GMT"}, {"fusion", "averaging"}, {"general", "roberta"}};
  auto ens = run_experiment(experiment_from_json(cfg), ctx, tmp / "toy-run");
  const double secs = seconds_since(t0);
  v.require(worst_single_acc >= 0.90, "a single model scored accuracy " + std::to_string(worst_single_acc));
  v.require(ens.aggregate.mean_f1_w >= best_member - 0.05, "ensemble F1 below best member - 0.05");
  const auto j = to_json(ens);
  v.require(j["scores"]["runs"].size() == 3, "report does not hold 3 per-seed scores");
  v.require(j["scores"].contains("mean") && j["scores"]["sd"].contains("f1_weighted"), "report lacks mean or SD");
  v.require(secs < 300.0, "runtime over 5 min");
  char buf[200];
  std::snprintf(buf, sizeof buf, "min single acc %.3f, AE-GMT F1 %.3f vs best member %.3f, SD %.4f, %.1f s",
                worst_single_acc, ens.aggregate.mean_f1_w, best_member, ens.aggregate.sd_f1_w, secs);
  if (v.ok) v.detail = buf;
  return v;
}

Verdict transfer_pipeline(const oracle::TempDir& tmp) {
  Verdict v;
  json datasets = {{"source", fixture::write_keyword_dataset(tmp / "transfer", "source", "twitter", 11)},
                   {"target", fixture::write_keyword_dataset(tmp / "transfer", "target", "reddit", 7)}};
  json cfg = fixture::encoder_config(datasets, "target", "toy");
  cfg["seeds"] = {1};
  cfg["transfer_source"] = "source";
  RunContext ctx;
  ctx.cache_root = tmp / "cache";
  bool mismatch = false;
  try {
    run_single(experiment_from_json(cfg), 1, ctx);
  } catch (const Error& e) {
    mismatch = e.kind() == ErrorKind::SchemaMismatch;
  }
  v.require(mismatch, "missing mapping did not raise SchemaMismatch");
  cfg["label_mapping"] = "twitter-to-3level";
  const auto mapping = builtin_mapping("twitter-to-3level");
  v.require(mapping.map() == std::vector<int>{0, 1, 1, 2}, "built-in mapping is not {0,1,1,2}");
  auto run = run_single(experiment_from_json(cfg), 1, ctx);
  v.require(run.lineage == std::vector<std::string>{"source-merged", "target"}, "lineage is not [source, target]");
  if (v.ok) v.detail = "lineage [" + run.lineage[0] + ", " + run.lineage[1] + "], unmapped pair raises SchemaMismatch";
  return v;
}

Verdict grid_search_counts() {
  Verdict v;
  auto corpus = synthetic::keyword_corpus({});
  HyperParams base;
  base.max_tokens = 64;
  const auto enc = resolve_encoder("toy");
  std::size_t fits = 0;
  auto reduced = grid_search(enc, {{8, 16}, {1e-3, 1e-5}, {5, 10}}, corpus.train, corpus.validation, base, {},
                             [&](const GridCell&) { ++fits; });
  v.require(fits == 8, "reduced space ran " + std::to_string(fits) + " fits");
  // Re-score the log exhaustively, applying the documented tie-break.
  const GridCell* best = nullptr;
  for (const auto& c : reduced.cells)
    if (!best || c.f1_w > best->f1_w || (c.f1_w == best->f1_w && grid_tie_break(c.hp, best->hp))) best = &c;
  v.require(best && reduced.best == best->hp, "returned hyperparameters are not the log's maximum");
  std::size_t cells = 0;
  auto full = grid_search(enc, SearchSpace::paper_default(), corpus.train, corpus.validation, base, {},
                          [&](const GridCell&) { ++cells; });
  v.require(cells == 36 && full.cells.size() == 36, "default space logged " + std::to_string(cells) + " cells");
  char buf[160];
  std::snprintf(buf, sizeof buf, "8 fits, best bs=%d lr=%g ne=%d F1 %.3f; default space 36 cells", reduced.best.batch_size,
                reduced.best.learning_rate, reduced.best.num_epochs, best ? best->f1_w : 0.0);
  if (v.ok) v.detail = buf;
  return v;
}

Verdict aggregation() {
  Verdict v;
  std::vector<ScoreSet> runs(3);
  runs[0].f1_w = 0.5;
  runs[1].f1_w = 0.6;
  runs[2].f1_w = 0.7;
  auto a = aggregate_runs(runs);
  v.require(a.mean_f1_w == 0.6, "mean is not exactly 0.6");
  v.require(std::abs(a.sd_f1_w - 0.0816497) <= 1e-6, "population SD " + std::to_string(a.sd_f1_w));
  char buf[80];
  std::snprintf(buf, sizeof buf, "mean %.15g, SD %.7f", a.mean_f1_w, a.sd_f1_w);
  if (v.ok) v.detail = buf;
  return v;
}

Verdict tie_breaks() {
  Verdict v;
  const double row[] = {0.5, 0.5};
  v.require(argmax(row) == 0, "row [0.5, 0.5] did not map to label 0");
  const std::size_t tied[] = {3, 3, 1};
  auto ds = synthetic::with_counts("tie", builtin_schema("reddit"), tied, Split::Train);
  const int label = fit_baseline(BaselineKind::Majority, ds).majority_label();
  v.require(label == 0, "tied majority chose label " + std::to_string(label));
  if (v.ok) v.detail = "argmax [0.5, 0.5] -> 0; tied majority counts -> 0";
  return v;
}

Verdict round_trip(const oracle::TempDir& tmp) {
  Verdict v;
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    auto pm = oracle::random_matrix(rng, 1 + rng() % 100, 2 + static_cast<int>(rng() % 4), "id-" + std::to_string(t) + "-");
    write_probability_matrix(tmp / "rt.tsv", pm);
    auto back = read_probability_matrix(tmp / "rt.tsv");
    v.require(back.post_ids() == pm.post_ids(), "id order changed");
    worst = std::max(worst, oracle::max_abs_diff(back.values(), pm.values()));
  }
  v.require(worst <= 1e-10, "values changed");
  char buf[80];
  std::snprintf(buf, sizeof buf, "50 matrices, max deviation %.2e", worst);
  if (v.ok) v.detail = buf;
  return v;
}

}  // namespace

int main() {
  oracle::TempDir tmp;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"fusion oracles", fusion_oracles},
      {"metric oracles", metric_oracles},
      {"worked metric example", worked_example},
      {"majority baseline", [&] { return majority_baseline(tmp); }},
      {"toy end-to-end", [&] { return toy_end_to_end(tmp); }},
      {"transfer pipeline", [&] { return transfer_pipeline(tmp); }},
      {"grid search", grid_search_counts},
      {"aggregation", aggregation},
      {"tie-break determinism", tie_breaks},
      {"probability matrix round trip", [&] { return round_trip(tmp); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %2zu %-30s %s\n", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
    failed += v.ok ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
