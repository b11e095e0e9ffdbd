#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace depkit {

// Per-post class probabilities. Rows follow post_ids; each row is
// non-negative and sums to 1 within 1e-6.
class ProbabilityMatrix {
 public:
  ProbabilityMatrix() = default;
  // Validates shape and row normalization.
  ProbabilityMatrix(std::vector<std::string> post_ids, int classes, std::vector<double> values);

  const std::vector<std::string>& post_ids() const { return post_ids_; }
  int classes() const { return classes_; }
  std::size_t rows() const { return post_ids_.size(); }
  std::span<const double> row(std::size_t r) const;
  std::span<const double> values() const { return values_; }
  double at(std::size_t r, int c) const { return values_[r * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(c)]; }

  friend bool operator==(const ProbabilityMatrix&, const ProbabilityMatrix&) = default;

 private:
  std::vector<std::string> post_ids_;
  int classes_ = 0;
  std::vector<double> values_;
};

inline constexpr double kRowSumTolerance = 1e-6;

// Header `pid<TAB>p0<TAB>p1...`; probabilities written with 17 significant
// digits so a round trip is exact.
void write_probability_matrix(const std::filesystem::path& path, const ProbabilityMatrix& pm);
ProbabilityMatrix read_probability_matrix(const std::filesystem::path& path);

}  // namespace depkit
