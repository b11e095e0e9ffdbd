#pragma once

// Data-parallel inner loops. Each kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`; the library
// calls the parallel one, tests and the benchmark compare the two.
//
// Matrices are dense row-major buffers of `rows * cols` doubles.

#include <cstdint>
#include <span>
#include <vector>

namespace depkit::kernels {

using MemberViews = std::span<const std::span<const double>>;

namespace serial {

// out[r,c] = mean over members of member[r,c].
void average_rows(MemberViews members, std::size_t rows, std::size_t cols, std::span<double> out);

// out[r,c] ∝ prior[c]^(1-k) * prod_m max(member[r,c], floor), renormalized per row.
void bayes_rows(MemberViews members, std::span<const double> prior, double floor, std::size_t rows,
                std::size_t cols, std::span<double> out);

// cells[t * classes + p] counts pairs (t, p). Labels must already be range-checked.
void confusion_counts(std::span<const int> truth, std::span<const int> pred, int classes,
                      std::span<std::int64_t> cells);

// Sums `parts` (each of length out.size()) in index order into out.
void reduce_in_order(std::span<const std::vector<double>> parts, std::span<double> out);

}  // namespace serial

namespace parallel {

void average_rows(MemberViews members, std::size_t rows, std::size_t cols, std::span<double> out);
void bayes_rows(MemberViews members, std::span<const double> prior, double floor, std::size_t rows,
                std::size_t cols, std::span<double> out);
void confusion_counts(std::span<const int> truth, std::span<const int> pred, int classes,
                      std::span<std::int64_t> cells);
// Bit-identical to the serial version: each element is summed over parts in
// the same order, only the element loop is split across threads.
void reduce_in_order(std::span<const std::vector<double>> parts, std::span<double> out);

}  // namespace parallel

int max_threads();

}  // namespace depkit::kernels
