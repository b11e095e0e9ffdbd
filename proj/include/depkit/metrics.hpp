#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

namespace depkit {

// cells(i, j) counts items with true label i predicted as j.
class ConfusionMatrix {
 public:
  ConfusionMatrix(int classes, std::vector<std::int64_t> cells);

  int classes() const { return classes_; }
  std::int64_t operator()(int truth, int pred) const {
    return cells_[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(pred)];
  }
  std::int64_t total() const;
  std::int64_t row_sum(int truth) const;
  std::int64_t col_sum(int pred) const;
  const std::vector<std::int64_t>& cells() const { return cells_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int classes_;
  std::vector<std::int64_t> cells_;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int classes);

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
};

struct ScoreSet {
  double accuracy = 0.0;
  double precision_w = 0.0;
  double recall_w = 0.0;
  double f1_w = 0.0;
  std::vector<ClassScore> per_class;
};

// Accuracy plus support-weighted precision, recall and F1. A ratio with a
// zero denominator is 0, and so is F1 when precision + recall is 0.
ScoreSet weighted_scores(const ConfusionMatrix& cm);

inline ScoreSet score_labels(std::span<const int> truth, std::span<const int> pred, int classes) {
  return weighted_scores(confusion(truth, pred, classes));
}

// Mean and population standard deviation (divide by n) across seeds.
struct RunAggregate {
  std::vector<ScoreSet> per_run;
  double mean_accuracy = 0.0;
  double mean_precision_w = 0.0;
  double mean_recall_w = 0.0;
  double mean_f1_w = 0.0;
  double sd_accuracy = 0.0;
  double sd_f1_w = 0.0;
};

RunAggregate aggregate_runs(std::span<const ScoreSet> scores);

double mean_of(std::span<const double> xs);
double population_sd(std::span<const double> xs);

nlohmann::json to_json(const ScoreSet& s);
ScoreSet score_set_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunAggregate& a);

}  // namespace depkit
