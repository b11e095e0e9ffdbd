#include <doctest.h>

#include <random>

#include "depkit/error.hpp"
#include "depkit/metrics.hpp"
#include "support/oracles.hpp"

using namespace depkit;

TEST_SUITE("metrics") {
  TEST_CASE("worked two-class example") {
    // truth [0,0,0,1], pred [0,0,1,1]: confusion [[2,1],[0,1]].
    const std::vector<int> truth{0, 0, 0, 1}, pred{0, 0, 1, 1};
    auto cm = confusion(truth, pred, 2);
    CHECK(cm.cells() == std::vector<std::int64_t>{2, 1, 0, 1});
    auto s = weighted_scores(cm);
    CHECK(s.accuracy == 0.75);
    // class 0: P 1, R 2/3, F1 0.8; class 1: P 0.5, R 1, F1 2/3.
    CHECK(s.f1_w == doctest::Approx(0.75 * 0.8 + 0.25 * (2.0 / 3.0)).epsilon(1e-12));
    CHECK(s.f1_w == doctest::Approx(0.76667).epsilon(1e-5));
    CHECK(s.precision_w == doctest::Approx(0.875));
    CHECK(s.recall_w == 0.75);
  }

  TEST_CASE("absent predicted class scores zero precision") {
    const std::vector<int> truth{0, 1, 2}, pred{0, 0, 0};
    auto s = score_labels(truth, pred, 3);
    CHECK(s.per_class[1].precision == 0.0);
    CHECK(s.per_class[1].f1 == 0.0);
    CHECK(s.per_class[0].precision == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("randomized agreement with definition-level oracle") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 200; ++t) {
      const int L = 2 + static_cast<int>(rng() % 4);
      const std::size_t n = 1 + rng() % 200;
      std::vector<int> truth(n), pred(n);
      for (std::size_t i = 0; i < n; ++i) {
        truth[i] = static_cast<int>(rng() % L);
        pred[i] = static_cast<int>(rng() % L);
      }
      auto s = score_labels(truth, pred, L);
      auto o = oracle::weighted_metrics(truth, pred, L);
      CHECK(std::abs(s.accuracy - o.accuracy) <= 1e-12);
      CHECK(std::abs(s.precision_w - o.precision) <= 1e-12);
      CHECK(std::abs(s.recall_w - o.recall) <= 1e-12);
      CHECK(std::abs(s.f1_w - o.f1) <= 1e-12);
      CHECK(std::abs(s.recall_w - s.accuracy) <= 1e-12);
    }
  }

  TEST_CASE("input errors") {
    const std::vector<int> a{0, 1}, b{0};
    CHECK_THROWS_AS(confusion(a, b, 2), Error);
    CHECK_THROWS_AS(confusion({}, {}, 2), Error);
    const std::vector<int> bad{0, 5};
    CHECK_THROWS_AS(confusion(bad, a, 2), Error);
    CHECK_THROWS_AS(weighted_scores(ConfusionMatrix(2, {0, 0, 0, 0})), Error);
    CHECK_THROWS_AS(aggregate_runs({}), Error);
  }

  TEST_CASE("aggregation uses the population SD") {
    std::vector<ScoreSet> runs(3);
    runs[0].f1_w = 0.5;
    runs[1].f1_w = 0.6;
    runs[2].f1_w = 0.7;
    for (auto& r : runs) r.accuracy = 0.4;
    auto a = aggregate_runs(runs);
    CHECK(a.mean_f1_w == 0.6);
    CHECK(a.sd_f1_w == doctest::Approx(std::sqrt(0.02 / 3.0)).epsilon(1e-12));
    CHECK(std::abs(a.sd_f1_w - 0.0816497) <= 1e-6);
    CHECK(a.sd_accuracy == 0.0);
    const double one[] = {0.3};
    CHECK(population_sd(one) == 0.0);
  }

  TEST_CASE("json round trip") {
    const std::vector<int> truth{0, 1, 2, 2}, pred{0, 2, 2, 1};
    auto s = score_labels(truth, pred, 3);
    auto back = score_set_from_json(to_json(s));
    CHECK(back.f1_w == s.f1_w);
    CHECK(back.per_class.size() == 3);
    CHECK(back.per_class[2].support == 2);
  }
}
