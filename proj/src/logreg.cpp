#include "depkit/logreg.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "depkit/error.hpp"

namespace depkit {

namespace {

void row_logits(std::span<const double> p, const SparseRow& row, int classes, std::size_t dims, std::vector<double>& z) {
  const double* b = p.data() + static_cast<std::size_t>(classes) * dims;
  for (int c = 0; c < classes; ++c) {
    const double* wc = p.data() + static_cast<std::size_t>(c) * dims;
    double acc = b[c];
    for (const auto& [j, v] : row) acc += wc[j] * v;
    z[static_cast<std::size_t>(c)] = acc;
  }
}

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

struct Problem {
  std::span<const SparseRow> rows;
  std::span<const int> labels;
  int classes;
  std::size_t dims;
  double C;
};

double gsl_f(const gsl_vector* x, void* params) {
  auto* pr = static_cast<Problem*>(params);
  return LogisticRegression::objective({x->data, x->size}, pr->rows, pr->labels, pr->classes, pr->dims, pr->C, {});
}

void gsl_df(const gsl_vector* x, void* params, gsl_vector* g) {
  auto* pr = static_cast<Problem*>(params);
  LogisticRegression::objective({x->data, x->size}, pr->rows, pr->labels, pr->classes, pr->dims, pr->C, {g->data, g->size});
}

void gsl_fdf(const gsl_vector* x, void* params, double* f, gsl_vector* g) {
  auto* pr = static_cast<Problem*>(params);
  *f = LogisticRegression::objective({x->data, x->size}, pr->rows, pr->labels, pr->classes, pr->dims, pr->C,
                                     {g->data, g->size});
}

}  // namespace

double LogisticRegression::objective(std::span<const double> p, std::span<const SparseRow> rows,
                                     std::span<const int> labels, int classes, std::size_t dims, double C,
                                     std::span<double> grad) {
  const auto L = static_cast<std::size_t>(classes);
  const std::size_t nw = L * dims;
  double f = 0.0;
  for (std::size_t i = 0; i < nw; ++i) f += 0.5 * p[i] * p[i];
  if (!grad.empty()) {
    for (std::size_t i = 0; i < nw; ++i) grad[i] = p[i];
    for (std::size_t i = nw; i < grad.size(); ++i) grad[i] = 0.0;
  }
  std::vector<double> z(L);
  for (std::size_t n = 0; n < rows.size(); ++n) {
    row_logits(p, rows[n], classes, dims, z);
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    const auto y = static_cast<std::size_t>(labels[n]);
    f += C * (mx + std::log(sum) - z[y]);
    if (grad.empty()) continue;
    for (std::size_t c = 0; c < L; ++c) {
      const double d = C * (std::exp(z[c] - mx) / sum - (c == y ? 1.0 : 0.0));
      double* gc = grad.data() + c * dims;
      for (const auto& [j, v] : rows[n]) gc[j] += d * v;
      grad[nw + c] += d;
    }
  }
  return f;
}

void LogisticRegression::fit(std::span<const SparseRow> rows, std::span<const int> labels, int classes,
                             std::size_t dimensions, const LogRegOptions& options) {
  if (rows.empty()) throw Error(ErrorKind::EmptyDataset, "no rows for logistic regression");
  if (rows.size() != labels.size()) throw Error(ErrorKind::LengthMismatch, "rows vs labels");
  if (classes < 2) throw Error(ErrorKind::InvalidSchema, "need at least 2 classes");
  for (int l : labels)
    if (l < 0 || l >= classes) throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(l));
  classes_ = classes;
  dims_ = dimensions;
  const std::size_t n = static_cast<std::size_t>(classes) * (dimensions + 1);
  w_.assign(n, 0.0);

  Problem problem{rows, labels, classes, dimensions, options.C};
  gsl_multimin_function_fdf fn;
  fn.n = n;
  fn.f = &gsl_f;
  fn.df = &gsl_df;
  fn.fdf = &gsl_fdf;
  fn.params = &problem;

  gsl_set_error_handler_off();
  std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_calloc(n), &gsl_vector_free);
  std::unique_ptr<gsl_multimin_fdfminimizer, decltype(&gsl_multimin_fdfminimizer_free)> solver(
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n), &gsl_multimin_fdfminimizer_free);
  gsl_multimin_fdfminimizer_set(solver.get(), &fn, x.get(), 0.1, 0.1);

  iterations_ = 0;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && iterations_ < options.max_iter) {
    ++iterations_;
    if (gsl_multimin_fdfminimizer_iterate(solver.get()) != GSL_SUCCESS) break;
    status = gsl_multimin_test_gradient(solver->gradient, options.gradient_tolerance);
  }
  const gsl_vector* best = gsl_multimin_fdfminimizer_x(solver.get());
  for (std::size_t i = 0; i < n; ++i) w_[i] = gsl_vector_get(best, i);
}

std::vector<double> LogisticRegression::predict_proba(const SparseRow& row) const {
  std::vector<double> z(static_cast<std::size_t>(classes_));
  row_logits(w_, row, classes_, dims_, z);
  softmax_inplace(z);
  return z;
}

void LogisticRegression::write(binio::Writer& w) const {
  w.put<std::int32_t>(classes_);
  w.put<std::uint64_t>(dims_);
  w.put<std::int32_t>(iterations_);
  w.put(w_);
}

LogisticRegression LogisticRegression::read(binio::Reader& r) {
  LogisticRegression m;
  m.classes_ = r.get<std::int32_t>();
  m.dims_ = r.get<std::uint64_t>();
  m.iterations_ = r.get<std::int32_t>();
  m.w_ = r.get_vector<double>();
  if (m.w_.size() != static_cast<std::size_t>(m.classes_) * (m.dims_ + 1))
    throw Error(ErrorKind::CorruptCheckpoint, "logistic-regression weights have the wrong size");
  return m;
}

}  // namespace depkit
