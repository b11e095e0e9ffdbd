#pragma once

// Independent reference computations for tests. These deliberately avoid the
// library's kernels and follow the textbook definitions term by term.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "depkit/probability.hpp"

namespace oracle {

inline std::vector<double> mean_rows(const std::vector<depkit::ProbabilityMatrix>& ms) {
  std::vector<double> out(ms.front().values().size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (const auto& m : ms) s += m.values()[i];
    out[i] = s / static_cast<double>(ms.size());
  }
  return out;
}

// prior^(1-k) * prod(p), renormalized; computed directly, not in log space.
inline std::vector<double> product_normalize(const std::vector<depkit::ProbabilityMatrix>& ms,
                                             const std::vector<double>& prior) {
  const std::size_t L = prior.size();
  const std::size_t rows = ms.front().rows();
  const double k = static_cast<double>(ms.size());
  std::vector<double> out(rows * L);
  for (std::size_t r = 0; r < rows; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < L; ++c) {
      double v = std::pow(prior[c], 1.0 - k);
      for (const auto& m : ms) v *= m.at(r, static_cast<int>(c));
      out[r * L + c] = v;
      z += v;
    }
    for (std::size_t c = 0; c < L; ++c) out[r * L + c] /= z;
  }
  return out;
}

struct Weighted {
  double accuracy, precision, recall, f1;
};

// Counts by scanning the pairs once per class, then support-weighted means.
inline Weighted weighted_metrics(const std::vector<int>& truth, const std::vector<int>& pred, int L) {
  const double n = static_cast<double>(truth.size());
  double correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
  Weighted w{correct / n, 0, 0, 0};
  for (int c = 0; c < L; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) tp += 1;
      if (pred[i] == c && truth[i] != c) fp += 1;
      if (pred[i] != c && truth[i] == c) fn += 1;
    }
    const double support = tp + fn;
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    w.precision += support / n * p;
    w.recall += support / n * r;
    w.f1 += support / n * f;
  }
  return w;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline depkit::ProbabilityMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, int L,
                                               const std::string& prefix = "p") {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<std::string> ids;
  std::vector<double> v(rows * static_cast<std::size_t>(L));
  for (std::size_t r = 0; r < rows; ++r) {
    ids.push_back(prefix + std::to_string(r));
    double s = 0.0;
    for (int c = 0; c < L; ++c) s += v[r * L + c] = u(rng);
    for (int c = 0; c < L; ++c) v[r * L + c] /= s;
  }
  return {std::move(ids), L, std::move(v)};
}

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("depkit-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
