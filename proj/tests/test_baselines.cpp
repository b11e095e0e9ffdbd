#include <doctest.h>

#include <cmath>

#include "depkit/baselines.hpp"
#include "depkit/error.hpp"
#include "depkit/ensemble.hpp"
#include "depkit/metrics.hpp"
#include "depkit/synthetic.hpp"
#include "depkit/text.hpp"
#include "support/oracles.hpp"

using namespace depkit;

namespace {

LabeledDataset small_set(const std::vector<std::string>& texts, const std::vector<int>& labels) {
  std::vector<LabeledItem> items;
  for (std::size_t i = 0; i < texts.size(); ++i) items.push_back({{"p" + std::to_string(i), texts[i]}, labels[i]});
  return {"small", builtin_schema("reddit"), std::move(items), Split::Train};
}

const std::vector<std::string> kTrain = {"sad tired alone tonight",     "sad empty alone",
                                         "happy sunny day",             "happy friends day out",
                                         "hopeless cannot sleep again", "hopeless tired cannot eat"};
const std::vector<int> kLabels = {1, 1, 0, 0, 2, 2};

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("tf-idf uses smoothed idf and l2 rows") {
    TfidfVectorizer v;
    v.fit(kTrain);
    CHECK(v.dimensions() == 15);
    // ln((1+6)/(1+df)) + 1 by hand for df 1 and df 2.
    const double idf1 = std::log(7.0 / 2.0) + 1.0, idf2 = std::log(7.0 / 3.0) + 1.0;
    CHECK(v.idf()[v.vocabulary().at("again")] == doctest::Approx(idf1).epsilon(1e-12));
    CHECK(v.idf()[v.vocabulary().at("sad")] == doctest::Approx(idf2).epsilon(1e-12));
    auto row = v.transform("Sad sad TIRED a");
    REQUIRE(row.size() == 2);
    double norm = 0.0;
    for (const auto& [j, x] : row) norm += x * x;
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& [j, x] : row) {
      if (j == v.vocabulary().at("sad")) CHECK(x == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
      else CHECK(x == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
    }
  }

  TEST_CASE("tf-idf logistic regression agrees with an independent reference fit") {
    auto ds = small_set(kTrain, kLabels);
    auto model = fit_baseline(BaselineKind::TfidfLogreg, ds);
    std::vector<Post> test = {{"a", "tired and sad"}, {"b", "sunny friends"}, {"c", "cannot sleep hopeless"},
                              {"d", "unknown words only"}};
    auto pm = predict_baseline_proba(model, test);
    // Reference probabilities from a multinomial L2 fit with C = 1 and an
    // unpenalized intercept, converged to a much tighter tolerance.
    const double expected[4][3] = {{0.2405962424250388, 0.4640305392034373, 0.295373218371524},
                                   {0.4667335754435751, 0.2641569344272069, 0.2691094901292179},
                                   {0.2273420301815289, 0.22089781298040737, 0.5517601568380638},
                                   {0.33572141192802557, 0.32855779102419963, 0.3357207970477748}};
    for (std::size_t r = 0; r < 4; ++r)
      for (int c = 0; c < 3; ++c) CHECK(std::abs(pm.at(r, c) - expected[r][c]) <= 1e-4);
    // The last row is a near tie between classes 0 and 2, so only the others are compared.
    auto labels = predict_baseline(model, test);
    CHECK(std::vector<int>(labels.begin(), labels.begin() + 3) == std::vector<int>{1, 0, 2});
  }

  TEST_CASE("logistic objective gradient matches finite differences") {
    TfidfVectorizer v;
    v.fit(kTrain);
    std::vector<SparseRow> rows;
    for (const auto& t : kTrain) rows.push_back(v.transform(t));
    const std::size_t dims = v.dimensions();
    std::vector<double> p(3 * (dims + 1));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::sin(static_cast<double>(i) * 0.7) * 0.3;
    std::vector<double> g(p.size());
    LogisticRegression::objective(p, rows, kLabels, 3, dims, 1.0, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto q = p;
      const double h = 1e-6;
      q[i] = p[i] + h;
      const double fp = LogisticRegression::objective(q, rows, kLabels, 3, dims, 1.0, {});
      q[i] = p[i] - h;
      const double fm = LogisticRegression::objective(q, rows, kLabels, 3, dims, 1.0, {});
      worst = std::max(worst, std::abs((fp - fm) / (2 * h) - g[i]));
    }
    CHECK(worst < 1e-7);
  }

  TEST_CASE("majority follows training counts with lowest-index ties") {
    const std::size_t reddit_train[] = {1659, 5140, 758};
    const std::size_t reddit_test[] = {2306, 1830, 360};
    auto train = synthetic::with_counts("reddit", builtin_schema("reddit"), reddit_train, Split::Train);
    auto test = synthetic::with_counts("reddit", builtin_schema("reddit"), reddit_test, Split::Test, 2);
    auto model = fit_baseline(BaselineKind::Majority, train);
    CHECK(model.majority_label() == 1);
    auto pred = predict_baseline(model, test.posts());
    std::size_t correct = 0;
    const auto truth = test.labels();
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
    CHECK(correct == 1830);
    CHECK(static_cast<double>(correct) / 4496.0 == doctest::Approx(0.40703).epsilon(1e-5));

    const std::size_t tied[] = {4, 4, 1};
    auto t = synthetic::with_counts("tie", builtin_schema("reddit"), tied, Split::Train);
    CHECK(fit_baseline(BaselineKind::Majority, t).majority_label() == 0);
    const std::size_t tied_late[] = {1, 3, 3};
    auto t2 = synthetic::with_counts("tie", builtin_schema("reddit"), tied_late, Split::Train);
    CHECK(fit_baseline(BaselineKind::Majority, t2).majority_label() == 1);
  }

  TEST_CASE("doc-vector baseline separates a keyword corpus and is deterministic") {
    auto corpus = synthetic::keyword_corpus({});
    BaselineConfig cfg;
    // 120 short posts give few updates per epoch; the default 20 passes stay near chance.
    cfg.docvec.dimensions = 32;
    cfg.docvec.epochs = 100;
    auto a = fit_baseline(BaselineKind::DocvecLogreg, corpus.train, cfg);
    auto b = fit_baseline(BaselineKind::DocvecLogreg, corpus.train, cfg);
    auto pa = predict_baseline_proba(a, corpus.test.posts());
    CHECK(pa == predict_baseline_proba(b, corpus.test.posts()));
    auto s = score_labels(corpus.test.labels(), hard_labels(pa), 3);
    CHECK(s.accuracy >= 0.7);
  }

  TEST_CASE("save and load reproduce predictions for every kind") {
    auto corpus = synthetic::keyword_corpus({});
    oracle::TempDir tmp;
    BaselineConfig cfg;
    cfg.docvec.dimensions = 16;
    cfg.docvec.epochs = 5;
    for (auto kind : {BaselineKind::Majority, BaselineKind::TfidfLogreg, BaselineKind::DocvecLogreg}) {
      auto model = fit_baseline(kind, corpus.train, cfg);
      const auto dir = tmp / std::string(to_string(kind));
      save_baseline(dir, model);
      auto back = load_baseline(dir);
      CHECK(back.kind() == kind);
      CHECK(predict_baseline_proba(back, corpus.test.posts()) == predict_baseline_proba(model, corpus.test.posts()));
    }
    CHECK(parse_baseline_kind("doc2vec") == BaselineKind::DocvecLogreg);
    CHECK_THROWS_AS(parse_baseline_kind("svm"), Error);
  }

  TEST_CASE("corrupt blobs are rejected") {
    oracle::TempDir tmp;
    auto corpus = synthetic::keyword_corpus({});
    save_baseline(tmp / "m", fit_baseline(BaselineKind::TfidfLogreg, corpus.train));
    auto blob = text::read_file(tmp / "m" / "model.bin");
    text::write_file_atomic(tmp / "m" / "model.bin", blob.substr(0, blob.size() / 2));
    try {
      load_baseline(tmp / "m");
      FAIL("expected CorruptCheckpoint");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::CorruptCheckpoint);
    }
  }
}
