#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depkit/corpus.hpp"
#include "depkit/probability.hpp"

namespace depkit {

enum class Combo { GMT, GT, GM, MT };
enum class Fusion { Averaging, Bayesian };

std::string_view to_string(Combo c);
std::string_view to_string(Fusion f);
Combo parse_combo(std::string_view s);
Fusion parse_fusion(std::string_view s);

bool has_general_slot(Combo c);
std::size_t member_count(Combo c);

struct EnsembleSpec {
  Combo combo = Combo::GMT;
  Fusion fusion = Fusion::Averaging;
  std::vector<std::string> members;

  // Throws ConfigError when the member list does not fit the combo.
  void validate() const;
};

// Model identifiers bound to the M and T slots.
inline constexpr std::string_view kMentalMember = "mentalbert";
inline constexpr std::string_view kTweetMember = "bertweet";

// Members for a combo in G, M, T order, with G bound to `general_choice`.
std::vector<std::string> resolve_members(Combo combo, const std::optional<std::string>& general_choice);

class ClassPrior {
 public:
  explicit ClassPrior(std::vector<double> weights);

  static ClassPrior uniform(int classes);
  // Training-set class frequencies.
  static ClassPrior from_labels(std::span<const int> labels, int classes);
  static ClassPrior from_dataset(const LabeledDataset& ds);

  int classes() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

inline constexpr double kProbabilityFloor = 1e-12;

ProbabilityMatrix average_fuse(std::span<const ProbabilityMatrix> members);

// fused[c] ∝ prior[c]^(1-k) * prod_m max(member_m[c], floor), renormalized.
// Throws DegeneratePrior if any prior weight is 0.
ProbabilityMatrix bayes_fuse(std::span<const ProbabilityMatrix> members, const ClassPrior& prior,
                             double floor = kProbabilityFloor);

ProbabilityMatrix fuse(Fusion fusion, std::span<const ProbabilityMatrix> members, const ClassPrior& prior);

// Row-wise argmax, lowest index on ties.
std::vector<int> hard_labels(const ProbabilityMatrix& pm);
int argmax(std::span<const double> row);

}  // namespace depkit
