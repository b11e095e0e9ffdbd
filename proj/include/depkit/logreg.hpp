#pragma once

#include <span>
#include <vector>

#include "depkit/binio.hpp"
#include "depkit/features.hpp"

namespace depkit {

struct LogRegOptions {
  // Inverse L2 strength: minimizes 0.5 * ||W||^2 + C * sum of cross-entropy.
  // Intercepts are not penalized.
  double C = 1.0;
  int max_iter = 1000;
  double gradient_tolerance = 1e-5;
};

// Multinomial logistic regression on sparse rows, fitted with GSL's BFGS
// minimizer.
class LogisticRegression {
 public:
  void fit(std::span<const SparseRow> rows, std::span<const int> labels, int classes, std::size_t dimensions,
           const LogRegOptions& options = {});

  std::vector<double> predict_proba(const SparseRow& row) const;

  int classes() const { return classes_; }
  std::size_t dimensions() const { return dims_; }
  int iterations() const { return iterations_; }
  const std::vector<double>& weights() const { return w_; }

  // Objective and its gradient at a flat parameter vector [W (classes x dims), b].
  static double objective(std::span<const double> params, std::span<const SparseRow> rows, std::span<const int> labels,
                          int classes, std::size_t dims, double C, std::span<double> grad);

  void write(binio::Writer& w) const;
  static LogisticRegression read(binio::Reader& r);

 private:
  int classes_ = 0;
  std::size_t dims_ = 0;
  int iterations_ = 0;
  std::vector<double> w_;  // classes x dims, then classes intercepts
};

}  // namespace depkit
