#include "depkit/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace depkit::kernels {

namespace {

// Member terms are summed in ascending order so the result does not depend
// on the order members were listed in.
template <class Term>
inline double sorted_sum(MemberViews members, Term term) {
  double small[8];
  std::vector<double> big;
  double* buf = small;
  if (members.size() > 8) {
    big.resize(members.size());
    buf = big.data();
  }
  for (std::size_t m = 0; m < members.size(); ++m) buf[m] = term(members[m]);
  std::sort(buf, buf + members.size());
  double acc = 0.0;
  for (std::size_t m = 0; m < members.size(); ++m) acc += buf[m];
  return acc;
}

inline void bayes_row(MemberViews members, std::span<const double> prior, double floor, std::size_t r,
                      std::size_t cols, double* out) {
  const double k = static_cast<double>(members.size());
  // Log domain: products of many small probabilities underflow otherwise.
  double max_log = -INFINITY;
  for (std::size_t c = 0; c < cols; ++c) {
    double acc = (1.0 - k) * std::log(prior[c]);
    acc += sorted_sum(members, [&](std::span<const double> m) { return std::log(std::max(m[r * cols + c], floor)); });
    out[c] = acc;
    max_log = std::max(max_log, acc);
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < cols; ++c) {
    out[c] = std::exp(out[c] - max_log);
    sum += out[c];
  }
  for (std::size_t c = 0; c < cols; ++c) out[c] /= sum;
}

}  // namespace

namespace serial {

void average_rows(MemberViews members, std::size_t rows, std::size_t cols, std::span<double> out) {
  const double k = static_cast<double>(members.size());
  for (std::size_t i = 0; i < rows * cols; ++i)
    out[i] = sorted_sum(members, [i](std::span<const double> m) { return m[i]; }) / k;
}

void bayes_rows(MemberViews members, std::span<const double> prior, double floor, std::size_t rows,
                std::size_t cols, std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) bayes_row(members, prior, floor, r, cols, out.data() + r * cols);
}

void confusion_counts(std::span<const int> truth, std::span<const int> pred, int classes,
                      std::span<std::int64_t> cells) {
  std::fill(cells.begin(), cells.end(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++cells[static_cast<std::size_t>(truth[i]) * static_cast<std::size_t>(classes) + static_cast<std::size_t>(pred[i])];
}

void reduce_in_order(std::span<const std::vector<double>> parts, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& p : parts)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
}

}  // namespace serial

namespace parallel {

void average_rows(MemberViews members, std::size_t rows, std::size_t cols, std::span<double> out) {
  const double k = static_cast<double>(members.size());
  const auto n = static_cast<std::int64_t>(rows * cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(i);
    out[j] = sorted_sum(members, [j](std::span<const double> m) { return m[j]; }) / k;
  }
}

void bayes_rows(MemberViews members, std::span<const double> prior, double floor, std::size_t rows,
                std::size_t cols, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < n; ++r)
    bayes_row(members, prior, floor, static_cast<std::size_t>(r), cols, out.data() + static_cast<std::size_t>(r) * cols);
}

void confusion_counts(std::span<const int> truth, std::span<const int> pred, int classes,
                      std::span<std::int64_t> cells) {
  std::fill(cells.begin(), cells.end(), 0);
  const auto n = static_cast<std::int64_t>(truth.size());
  const auto width = static_cast<std::size_t>(classes);
#pragma omp parallel
  {
    std::vector<std::int64_t> local(cells.size(), 0);
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i)
      ++local[static_cast<std::size_t>(truth[static_cast<std::size_t>(i)]) * width +
              static_cast<std::size_t>(pred[static_cast<std::size_t>(i)])];
#pragma omp critical
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c] += local[c];
  }
}

void reduce_in_order(std::span<const std::vector<double>> parts, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& p : parts) acc += p[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = acc;
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace depkit::kernels
