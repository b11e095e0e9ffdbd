#include "depkit/ensemble.hpp"

#include <cctype>

#include <cmath>
#include <set>

#include "depkit/error.hpp"
#include "depkit/kernels.hpp"

namespace depkit {

std::string_view to_string(Combo c) {
  switch (c) {
    case Combo::GMT: return "GMT";
    case Combo::GT: return "GT";
    case Combo::GM: return "GM";
    case Combo::MT: return "MT";
  }
  return "?";
}

std::string_view to_string(Fusion f) { return f == Fusion::Averaging ? "averaging" : "bayesian"; }

Combo parse_combo(std::string_view raw) {
  std::string s(raw);
  for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (s == "GMT") return Combo::GMT;
  if (s == "GT") return Combo::GT;
  if (s == "GM") return Combo::GM;
  if (s == "MT") return Combo::MT;
  throw Error(ErrorKind::ConfigError, "unknown ensemble combination '" + std::string(raw) + "'");
}

Fusion parse_fusion(std::string_view s) {
  if (s == "averaging" || s == "AE" || s == "average") return Fusion::Averaging;
  if (s == "bayesian" || s == "BE" || s == "bayes") return Fusion::Bayesian;
  throw Error(ErrorKind::ConfigError, "unknown fusion '" + std::string(s) + "'");
}

bool has_general_slot(Combo c) { return c != Combo::MT; }

std::size_t member_count(Combo c) { return c == Combo::GMT ? 3 : 2; }

void EnsembleSpec::validate() const {
  if (members.size() != member_count(combo))
    throw Error(ErrorKind::ConfigError, std::string(to_string(combo)) + " needs " + std::to_string(member_count(combo)) +
                                            " members, got " + std::to_string(members.size()));
  std::set<std::string> seen(members.begin(), members.end());
  if (seen.size() != members.size()) throw Error(ErrorKind::ConfigError, "ensemble members must be distinct");
}

std::vector<std::string> resolve_members(Combo combo, const std::optional<std::string>& general_choice) {
  std::vector<std::string> out;
  if (has_general_slot(combo)) {
    if (!general_choice || general_choice->empty())
      throw Error(ErrorKind::MissingGeneralChoice, std::string(to_string(combo)) + " has a general-model slot");
    out.push_back(*general_choice);
  }
  if (combo == Combo::GMT || combo == Combo::GM || combo == Combo::MT) out.emplace_back(kMentalMember);
  if (combo == Combo::GMT || combo == Combo::GT || combo == Combo::MT) out.emplace_back(kTweetMember);
  return out;
}

ClassPrior::ClassPrior(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw Error(ErrorKind::DegeneratePrior, "empty prior");
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw Error(ErrorKind::DegeneratePrior, "negative prior weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::DegeneratePrior, "prior sums to " + std::to_string(sum));
}

ClassPrior ClassPrior::uniform(int classes) {
  return ClassPrior(std::vector<double>(static_cast<std::size_t>(classes), 1.0 / classes));
}

ClassPrior ClassPrior::from_labels(std::span<const int> labels, int classes) {
  if (labels.empty()) throw Error(ErrorKind::EmptyInput, "no labels for prior");
  std::vector<double> w(static_cast<std::size_t>(classes), 0.0);
  for (int l : labels) {
    if (l < 0 || l >= classes) throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(l));
    w[static_cast<std::size_t>(l)] += 1.0;
  }
  for (double& x : w) x /= static_cast<double>(labels.size());
  return ClassPrior(std::move(w));
}

ClassPrior ClassPrior::from_dataset(const LabeledDataset& ds) { return from_labels(ds.labels(), ds.schema().size()); }

namespace {

void check_members(std::span<const ProbabilityMatrix> members) {
  if (members.empty()) throw Error(ErrorKind::ShapeMismatch, "no ensemble members");
  const auto& first = members.front();
  for (std::size_t m = 1; m < members.size(); ++m) {
    if (members[m].classes() != first.classes() || members[m].rows() != first.rows())
      throw Error(ErrorKind::ShapeMismatch, "member " + std::to_string(m) + " shape differs from member 0");
    if (members[m].post_ids() != first.post_ids())
      throw Error(ErrorKind::IdOrderMismatch, "member " + std::to_string(m) + " post order differs from member 0");
  }
}

std::vector<std::span<const double>> views(std::span<const ProbabilityMatrix> members) {
  std::vector<std::span<const double>> v;
  v.reserve(members.size());
  for (const auto& m : members) v.push_back(m.values());
  return v;
}

}  // namespace

ProbabilityMatrix average_fuse(std::span<const ProbabilityMatrix> members) {
  check_members(members);
  const auto& first = members.front();
  std::vector<double> out(first.values().size());
  auto v = views(members);
  kernels::parallel::average_rows(v, first.rows(), static_cast<std::size_t>(first.classes()), out);
  return {first.post_ids(), first.classes(), std::move(out)};
}

ProbabilityMatrix bayes_fuse(std::span<const ProbabilityMatrix> members, const ClassPrior& prior, double floor) {
  check_members(members);
  const auto& first = members.front();
  if (prior.classes() != first.classes())
    throw Error(ErrorKind::ShapeMismatch, "prior has " + std::to_string(prior.classes()) + " classes, members " +
                                              std::to_string(first.classes()));
  for (double w : prior.weights())
    if (w == 0.0) throw Error(ErrorKind::DegeneratePrior, "zero prior weight");
  std::vector<double> out(first.values().size());
  auto v = views(members);
  kernels::parallel::bayes_rows(v, prior.weights(), floor, first.rows(), static_cast<std::size_t>(first.classes()), out);
  return {first.post_ids(), first.classes(), std::move(out)};
}

ProbabilityMatrix fuse(Fusion fusion, std::span<const ProbabilityMatrix> members, const ClassPrior& prior) {
  return fusion == Fusion::Averaging ? average_fuse(members) : bayes_fuse(members, prior);
}

int argmax(std::span<const double> row) {
  int best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

std::vector<int> hard_labels(const ProbabilityMatrix& pm) {
  if (pm.rows() == 0) throw Error(ErrorKind::EmptyInput, "empty probability matrix");
  std::vector<int> out(pm.rows());
  for (std::size_t r = 0; r < pm.rows(); ++r) out[r] = argmax(pm.row(r));
  return out;
}

}  // namespace depkit
