#include <doctest.h>

#include <fstream>

#include "depkit/corpus.hpp"
#include "depkit/error.hpp"
#include "depkit/synthetic.hpp"
#include "support/oracles.hpp"

using namespace depkit;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

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

TEST_SUITE("corpus") {
  TEST_CASE("post text joins title and body") { CHECK(compose_post_text("title", "body") == "title : body"); }

  TEST_CASE("builtin schemas") {
    CHECK(builtin_schema("reddit").size() == 3);
    CHECK(builtin_schema("twitter").size() == 4);
    CHECK(builtin_schema("reddit") == builtin_schema("depression-3level"));
    CHECK(builtin_schema("twitter").level_name(1) == "change_of_feelings");
    CHECK(kind_of([] { LabelSchema("x", {"a"}); }) == ErrorKind::InvalidSchema);
    CHECK(kind_of([] { LabelSchema("x", {"a", "a"}); }) == ErrorKind::InvalidSchema);
  }

  TEST_CASE("loading accepts names and indices and rejects malformed input") {
    oracle::TempDir tmp;
    const auto schema = builtin_schema("reddit");
    write_text(tmp / "ok.tsv", "pid\ttext\tlabel\na\thello\tsevere\nb\tworld\t0\nc\tline\\nbreak\tmoderate\n");
    auto ds = load_dataset(tmp / "ok.tsv", schema, Split::Train);
    CHECK(ds.name() == "ok");
    CHECK(ds.labels() == std::vector<int>{2, 0, 1});
    CHECK(ds.items()[2].post.text == "line\nbreak");

    write_dataset(tmp / "round.tsv", ds);
    CHECK(load_dataset(tmp / "round.tsv", schema, Split::Train, "ok") == ds);

    write_text(tmp / "hdr.tsv", "id\ttext\tlabel\na\tx\t0\n");
    CHECK(kind_of([&] { load_dataset(tmp / "hdr.tsv", schema, Split::Train); }) == ErrorKind::MalformedRow);
    write_text(tmp / "cols.tsv", "pid\ttext\tlabel\na\tx\n");
    CHECK(kind_of([&] { load_dataset(tmp / "cols.tsv", schema, Split::Train); }) == ErrorKind::MalformedRow);
    write_text(tmp / "lab.tsv", "pid\ttext\tlabel\na\tx\tterrible\n");
    CHECK(kind_of([&] { load_dataset(tmp / "lab.tsv", schema, Split::Train); }) == ErrorKind::UnknownLabel);
    write_text(tmp / "idx.tsv", "pid\ttext\tlabel\na\tx\t3\n");
    CHECK(kind_of([&] { load_dataset(tmp / "idx.tsv", schema, Split::Train); }) == ErrorKind::UnknownLabel);
    write_text(tmp / "dup.tsv", "pid\ttext\tlabel\na\tx\t0\na\ty\t1\n");
    CHECK(kind_of([&] { load_dataset(tmp / "dup.tsv", schema, Split::Train); }) == ErrorKind::DuplicateId);
    write_text(tmp / "blank.tsv", "pid\ttext\tlabel\na\t  \t0\n");
    CHECK(kind_of([&] { load_dataset(tmp / "blank.tsv", schema, Split::Train); }) == ErrorKind::EmptyText);
    write_text(tmp / "empty.tsv", "pid\ttext\tlabel\n");
    CHECK(kind_of([&] { load_dataset(tmp / "empty.tsv", schema, Split::Train); }) == ErrorKind::EmptyDataset);
    CHECK(kind_of([&] { load_dataset(tmp / "missing.tsv", schema, Split::Train); }) == ErrorKind::DatasetNotFound);
  }

  TEST_CASE("class distribution of the Reddit test split counts") {
    const std::size_t counts[] = {2306, 1830, 360};
    auto ds = synthetic::with_counts("reddit", builtin_schema("reddit"), counts, Split::Test);
    auto dist = class_distribution(ds);
    REQUIRE(dist.size() == 3);
    CHECK(dist[0].count == 2306);
    CHECK(dist[1].count == 1830);
    CHECK(dist[2].count == 360);
    CHECK(dist[0].fraction == doctest::Approx(2306.0 / 4496.0).epsilon(1e-12));
    CHECK(dist[0].fraction == doctest::Approx(0.513).epsilon(1e-3));
    CHECK(dist[1].fraction == doctest::Approx(0.407).epsilon(1e-3));
    CHECK(dist[2].fraction == doctest::Approx(0.080).epsilon(1e-2));
  }

  TEST_CASE("merging folds change_of_feelings and moderate together") {
    const auto twitter = builtin_schema("twitter");
    const std::size_t counts[] = {5, 3, 4, 2};
    auto ds = synthetic::with_counts("twitter", twitter, counts, Split::Train);
    auto mapping = builtin_mapping("twitter-to-3level");
    CHECK(mapping.map() == std::vector<int>{0, 1, 1, 2});
    auto merged = merge_labels(ds, mapping);
    CHECK(merged.name() == "twitter-merged");
    CHECK(merged.schema().size() == 3);
    auto dist = class_distribution(merged);
    CHECK(dist[0].count == 5);
    CHECK(dist[1].count == 7);
    CHECK(dist[2].count == 2);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(merged.items()[i].post == ds.items()[i].post);
      CHECK(merged.items()[i].label == mapping(ds.items()[i].label));
    }
    CHECK(merge_labels(merged, LabelMapping::identity(merged.schema())) == merged);
    CHECK(kind_of([&] { merge_labels(merged, mapping); }) == ErrorKind::SchemaMismatch);
  }

  TEST_CASE("mapping validation") {
    const auto four = builtin_schema("twitter");
    const auto three = builtin_schema("reddit");
    CHECK(kind_of([&] { LabelMapping(four, three, {0, 1, 1}); }) == ErrorKind::InvalidMapping);
    CHECK(kind_of([&] { LabelMapping(four, three, {0, 1, 1, 3}); }) == ErrorKind::InvalidMapping);
    CHECK(kind_of([&] { LabelMapping(four, three, {0, 1, 1, 1}); }) == ErrorKind::SchemaMismatch);
    oracle::TempDir tmp;
    write_text(tmp / "m.txt", "# merge\nnot_depressed -> not_depressed\nchange_of_feelings -> moderate\n"
                              "moderate -> moderate\nsevere -> severe\n");
    CHECK(load_mapping(tmp / "m.txt", four, three).map() == std::vector<int>{0, 1, 1, 2});
  }

  TEST_CASE("concat requires equal schemas") {
    auto a = synthetic::keyword_corpus({});
    auto joined = concat(a.train, a.validation, Split::Train);
    CHECK(joined.size() == 150);
    CHECK(joined.name() == a.train.name());
    const std::size_t counts[] = {1, 1, 1, 1};
    auto other = synthetic::with_counts("t", builtin_schema("twitter"), counts, Split::Train);
    CHECK(kind_of([&] { concat(a.train, other, Split::Train); }) == ErrorKind::SchemaMismatch);
  }

  TEST_CASE("split names") {
    CHECK(parse_split("dev") == Split::Validation);
    CHECK(to_string(Split::Test) == "test");
  }
}
