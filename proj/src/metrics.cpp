#include "depkit/metrics.hpp"

#include <algorithm>

#include <cmath>
#include <numeric>

#include "depkit/error.hpp"
#include "depkit/kernels.hpp"

namespace depkit {

ConfusionMatrix::ConfusionMatrix(int classes, std::vector<std::int64_t> cells)
    : classes_(classes), cells_(std::move(cells)) {
  if (classes_ < 1 || cells_.size() != static_cast<std::size_t>(classes_) * static_cast<std::size_t>(classes_))
    throw Error(ErrorKind::ShapeMismatch, "confusion matrix is not square");
  for (auto c : cells_)
    if (c < 0) throw Error(ErrorKind::ShapeMismatch, "negative confusion cell");
}

std::int64_t ConfusionMatrix::total() const { return std::accumulate(cells_.begin(), cells_.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::row_sum(int truth) const {
  std::int64_t s = 0;
  for (int j = 0; j < classes_; ++j) s += (*this)(truth, j);
  return s;
}

std::int64_t ConfusionMatrix::col_sum(int pred) const {
  std::int64_t s = 0;
  for (int i = 0; i < classes_; ++i) s += (*this)(i, pred);
  return s;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int classes) {
  if (truth.size() != pred.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(truth.size()) + " true vs " + std::to_string(pred.size()) + " predicted labels");
  if (truth.empty()) throw Error(ErrorKind::EmptyInput, "no labels to compare");
  if (classes < 1) throw Error(ErrorKind::LabelOutOfRange, "class count must be positive");
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] < 0 || truth[i] >= classes || pred[i] < 0 || pred[i] >= classes)
      throw Error(ErrorKind::LabelOutOfRange, "pair " + std::to_string(i) + " (" + std::to_string(truth[i]) + ", " +
                                                  std::to_string(pred[i]) + ") outside [0, " + std::to_string(classes) + ")");
  std::vector<std::int64_t> cells(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes));
  kernels::parallel::confusion_counts(truth, pred, classes, cells);
  return {classes, std::move(cells)};
}

ScoreSet weighted_scores(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) throw Error(ErrorKind::EmptyMatrix, "confusion matrix has no items");
  ScoreSet s;
  std::int64_t trace = 0;
  for (int c = 0; c < cm.classes(); ++c) {
    const auto tp = cm(c, c);
    trace += tp;
    const auto predicted = cm.col_sum(c);
    const auto actual = cm.row_sum(c);
    ClassScore k;
    k.support = actual;
    k.precision = predicted == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(predicted);
    k.recall = actual == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(actual);
    const double pr = k.precision + k.recall;
    k.f1 = pr == 0.0 ? 0.0 : 2.0 * k.precision * k.recall / pr;
    const double w = static_cast<double>(actual) / static_cast<double>(total);
    s.precision_w += w * k.precision;
    s.recall_w += w * k.recall;
    s.f1_w += w * k.f1;
    s.per_class.push_back(k);
  }
  s.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return s;
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorKind::EmptyList, "mean of nothing");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_sd(std::span<const double> xs) {
  const double m = mean_of(xs);
  // Identical values can still give a mean a rounding step away from them.
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

RunAggregate aggregate_runs(std::span<const ScoreSet> scores) {
  if (scores.empty()) throw Error(ErrorKind::EmptyList, "no runs to aggregate");
  RunAggregate a;
  a.per_run.assign(scores.begin(), scores.end());
  std::vector<double> acc, prec, rec, f1;
  for (const auto& s : scores) {
    acc.push_back(s.accuracy);
    prec.push_back(s.precision_w);
    rec.push_back(s.recall_w);
    f1.push_back(s.f1_w);
  }
  a.mean_accuracy = mean_of(acc);
  a.mean_precision_w = mean_of(prec);
  a.mean_recall_w = mean_of(rec);
  a.mean_f1_w = mean_of(f1);
  a.sd_accuracy = population_sd(acc);
  a.sd_f1_w = population_sd(f1);
  return a;
}

nlohmann::json to_json(const ScoreSet& s) {
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& k : s.per_class)
    per_class.push_back({{"precision", k.precision}, {"recall", k.recall}, {"f1", k.f1}, {"support", k.support}});
  return {{"accuracy", s.accuracy},
          {"precision_weighted", s.precision_w},
          {"recall_weighted", s.recall_w},
          {"f1_weighted", s.f1_w},
          {"per_class", per_class}};
}

ScoreSet score_set_from_json(const nlohmann::json& j) {
  ScoreSet s;
  s.accuracy = j.at("accuracy").get<double>();
  s.precision_w = j.at("precision_weighted").get<double>();
  s.recall_w = j.at("recall_weighted").get<double>();
  s.f1_w = j.at("f1_weighted").get<double>();
  for (const auto& k : j.at("per_class"))
    s.per_class.push_back({k.at("precision").get<double>(), k.at("recall").get<double>(), k.at("f1").get<double>(),
                           k.at("support").get<std::int64_t>()});
  return s;
}

nlohmann::json to_json(const RunAggregate& a) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : a.per_run) runs.push_back(to_json(s));
  return {{"runs", runs},
          {"mean",
           {{"accuracy", a.mean_accuracy},
            {"precision_weighted", a.mean_precision_w},
            {"recall_weighted", a.mean_recall_w},
            {"f1_weighted", a.mean_f1_w}}},
          {"sd", {{"kind", "population"}, {"accuracy", a.sd_accuracy}, {"f1_weighted", a.sd_f1_w}}}};
}

}  // namespace depkit
