#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string_view>
#include <vector>

#include "depkit/corpus.hpp"
#include "depkit/features.hpp"
#include "depkit/logreg.hpp"
#include "depkit/probability.hpp"

namespace depkit {

enum class BaselineKind { Majority, TfidfLogreg, DocvecLogreg };
std::string_view to_string(BaselineKind k);
BaselineKind parse_baseline_kind(std::string_view s);

struct BaselineConfig {
  LogRegOptions logreg;
  DocVecOptions docvec;
};

nlohmann::json to_json(const BaselineConfig& c);

class BaselineModel {
 public:
  BaselineKind kind() const { return kind_; }
  const LabelSchema& schema() const { return schema_; }
  const BaselineConfig& config() const { return config_; }
  // Only meaningful for the majority kind.
  int majority_label() const { return majority_; }

  friend BaselineModel fit_baseline(BaselineKind kind, const LabeledDataset& train, const BaselineConfig& config);
  friend ProbabilityMatrix predict_baseline_proba(const BaselineModel& model, std::span<const Post> posts);
  friend void save_baseline(const std::filesystem::path& dir, const BaselineModel& model);
  friend BaselineModel load_baseline(const std::filesystem::path& dir);

 private:
  BaselineKind kind_ = BaselineKind::Majority;
  LabelSchema schema_;
  BaselineConfig config_;
  int majority_ = 0;
  TfidfVectorizer tfidf_;
  DocVecModel docvec_;
  LogisticRegression logreg_;
};

// Majority: most frequent training label, lowest index on ties.
BaselineModel fit_baseline(BaselineKind kind, const LabeledDataset& train, const BaselineConfig& config = {});

// Majority rows are one-hot; the logistic-regression kinds return softmax rows.
ProbabilityMatrix predict_baseline_proba(const BaselineModel& model, std::span<const Post> posts);
std::vector<int> predict_baseline(const BaselineModel& model, std::span<const Post> posts);

// Directory with model.bin (versioned binary blob) and manifest.json.
void save_baseline(const std::filesystem::path& dir, const BaselineModel& model);
BaselineModel load_baseline(const std::filesystem::path& dir);

// Carried in every majority-baseline report.
inline constexpr std::string_view kMajorityNote =
    "majority predicts the most frequent TRAINING label (Reddit: level 1, test accuracy 1830/4496 = 0.407). "
    "The reference Reddit majority accuracy of 0.513 equals the test-split level-0 share instead, and the "
    "reference Twitter value of 0.416 matches no single split share, so those rows are not expected to reproduce.";

}  // namespace depkit
