#include <doctest.h>

#include <random>

#include "depkit/ensemble.hpp"
#include "depkit/error.hpp"
#include "depkit/synthetic.hpp"
#include "support/oracles.hpp"

using namespace depkit;

namespace {

ProbabilityMatrix one_row(std::vector<double> v) { return {{"a"}, static_cast<int>(v.size()), std::move(v)}; }

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_SUITE("ensemble") {
  TEST_CASE("two-member Bayesian example") {
    std::vector<ProbabilityMatrix> ms{one_row({0.2, 0.8}), one_row({0.6, 0.4})};
    auto out = bayes_fuse(ms, ClassPrior::uniform(2));
    // 0.12 vs 0.32 -> 0.12/0.44 and 0.32/0.44.
    CHECK(out.at(0, 0) == doctest::Approx(0.12 / 0.44).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(0.32 / 0.44).epsilon(1e-12));
    CHECK(out.at(0, 0) == doctest::Approx(0.272727).epsilon(1e-6));
    auto avg = average_fuse(ms);
    CHECK(avg.at(0, 0) == doctest::Approx(0.4));
    CHECK(avg.at(0, 1) == doctest::Approx(0.6));
  }

  TEST_CASE("non-uniform prior divides out k-1 copies") {
    std::vector<ProbabilityMatrix> ms{one_row({0.5, 0.5}), one_row({0.5, 0.5})};
    auto out = bayes_fuse(ms, ClassPrior({0.25, 0.75}));
    // prior^(1-2) = [4, 4/3]; renormalized [0.75, 0.25].
    CHECK(out.at(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
    auto single = bayes_fuse(std::vector<ProbabilityMatrix>{one_row({0.3, 0.7})}, ClassPrior({0.9, 0.1}));
    CHECK(single.at(0, 0) == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("zero probabilities are floored rather than collapsing a row") {
    std::vector<ProbabilityMatrix> ms{one_row({0.0, 1.0}), one_row({1.0, 0.0})};
    auto out = bayes_fuse(ms, ClassPrior::uniform(2));
    CHECK(out.at(0, 0) == doctest::Approx(0.5));
  }

  TEST_CASE("randomized oracle agreement and permutation invariance") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
      const int L = 2 + static_cast<int>(rng() % 4);
      const std::size_t rows = 1 + rng() % 50;
      const std::size_t k = 1 + rng() % 4;
      std::vector<ProbabilityMatrix> ms;
      for (std::size_t m = 0; m < k; ++m) ms.push_back(oracle::random_matrix(rng, rows, L));
      auto avg = average_fuse(ms);
      auto bay = bayes_fuse(ms, ClassPrior::uniform(L));
      CHECK(oracle::max_abs_diff(avg.values(), oracle::mean_rows(ms)) <= 1e-12);
      CHECK(oracle::max_abs_diff(bay.values(), oracle::product_normalize(ms, std::vector<double>(L, 1.0 / L))) <= 1e-12);
      std::vector<ProbabilityMatrix> rev(ms.rbegin(), ms.rend());
      CHECK(average_fuse(rev) == avg);
      CHECK(bayes_fuse(rev, ClassPrior::uniform(L)) == bay);
    }
  }

  TEST_CASE("shape, id order and prior errors") {
    auto a = ProbabilityMatrix({"x", "y"}, 2, {0.5, 0.5, 0.5, 0.5});
    auto b = ProbabilityMatrix({"y", "x"}, 2, {0.5, 0.5, 0.5, 0.5});
    auto c = ProbabilityMatrix({"x", "y"}, 3, {0.2, 0.3, 0.5, 0.2, 0.3, 0.5});
    std::vector<ProbabilityMatrix> order{a, b}, shape{a, c};
    CHECK(kind_of([&] { average_fuse(order); }) == ErrorKind::IdOrderMismatch);
    CHECK(kind_of([&] { average_fuse(shape); }) == ErrorKind::ShapeMismatch);
    CHECK(kind_of([&] { average_fuse(std::vector<ProbabilityMatrix>{}); }) == ErrorKind::ShapeMismatch);
    std::vector<ProbabilityMatrix> ok{a, a};
    CHECK(kind_of([&] { bayes_fuse(ok, ClassPrior({1.0, 0.0})); }) == ErrorKind::DegeneratePrior);
  }

  TEST_CASE("ties resolve to the lowest index") {
    const double row[] = {0.5, 0.5};
    CHECK(argmax(row) == 0);
    const double row3[] = {0.2, 0.4, 0.4};
    CHECK(argmax(row3) == 1);
    CHECK(hard_labels(ProbabilityMatrix({"a", "b"}, 2, {0.5, 0.5, 0.3, 0.7})) == std::vector<int>{0, 1});
  }

  TEST_CASE("member resolution") {
    CHECK(resolve_members(Combo::GMT, std::string("roberta")) == std::vector<std::string>{"roberta", "mentalbert", "bertweet"});
    CHECK(resolve_members(Combo::MT, std::nullopt) == std::vector<std::string>{"mentalbert", "bertweet"});
    CHECK(resolve_members(Combo::GT, std::string("bert")) == std::vector<std::string>{"bert", "bertweet"});
    CHECK(kind_of([] { resolve_members(Combo::GM, std::nullopt); }) == ErrorKind::MissingGeneralChoice);
    CHECK(member_count(Combo::GMT) == 3);
    CHECK(parse_combo("gmt") == Combo::GMT);
    CHECK(parse_fusion("bayesian") == Fusion::Bayesian);
  }

  TEST_CASE("prior from training labels") {
    const std::size_t counts[] = {1659, 5140, 758};
    auto ds = synthetic::with_counts("reddit", builtin_schema("reddit"), counts, Split::Train);
    auto prior = ClassPrior::from_dataset(ds);
    CHECK(prior.weights()[1] == doctest::Approx(5140.0 / 7557.0));
    CHECK(ClassPrior::uniform(4).weights()[3] == 0.25);
    CHECK_THROWS_AS(ClassPrior({0.5, 0.6}), Error);
  }
}
