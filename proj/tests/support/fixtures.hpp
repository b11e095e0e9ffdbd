#pragma once

// Writes small synthetic corpora to disk in the dataset file format and
// builds experiment configs around them.

#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>

#include "depkit/corpus.hpp"
#include "depkit/synthetic.hpp"

namespace fixture {

// Keyword corpus under the built-in schema `schema` ("reddit" for 3 levels,
// "twitter" for 4), written as <dir>/<name>_{train,validation,test}.tsv.
inline nlohmann::json write_keyword_dataset(const std::filesystem::path& dir, const std::string& name,
                                            const std::string& schema, std::uint64_t seed = 7) {
  depkit::synthetic::CorpusOptions o;
  o.name = name;
  o.classes = depkit::builtin_schema(schema).size();
  o.seed = seed;
  auto splits = depkit::synthetic::keyword_corpus(o, depkit::builtin_schema(schema));
  std::filesystem::create_directories(dir);
  depkit::write_dataset(dir / (name + "_train.tsv"), splits.train);
  depkit::write_dataset(dir / (name + "_validation.tsv"), splits.validation);
  depkit::write_dataset(dir / (name + "_test.tsv"), splits.test);
  return {{"schema", schema},
          {"train", (dir / (name + "_train.tsv")).string()},
          {"validation", (dir / (name + "_validation.tsv")).string()},
          {"test", (dir / (name + "_test.tsv")).string()}};
}

// Filler-only posts with exact per-level counts for each split.
inline nlohmann::json write_count_dataset(const std::filesystem::path& dir, const std::string& name,
                                          const std::string& schema, std::span<const std::size_t> train,
                                          std::span<const std::size_t> validation, std::span<const std::size_t> test) {
  using depkit::Split;
  const auto s = depkit::builtin_schema(schema);
  std::filesystem::create_directories(dir);
  depkit::write_dataset(dir / (name + "_train.tsv"), depkit::synthetic::with_counts(name, s, train, Split::Train, 1));
  depkit::write_dataset(dir / (name + "_validation.tsv"),
                        depkit::synthetic::with_counts(name + "v", s, validation, Split::Validation, 2));
  depkit::write_dataset(dir / (name + "_test.tsv"), depkit::synthetic::with_counts(name + "t", s, test, Split::Test, 3));
  return {{"schema", schema},
          {"train", (dir / (name + "_train.tsv")).string()},
          {"validation", (dir / (name + "_validation.tsv")).string()},
          {"test", (dir / (name + "_test.tsv")).string()}};
}

// Hyperparameters small enough for quick toy runs.
inline nlohmann::json quick_hyperparams() {
  return {{"batch_size", 8}, {"learning_rate", 1e-3}, {"num_epochs", 10}, {"max_tokens", 64}};
}

inline nlohmann::json encoder_config(const nlohmann::json& datasets, const std::string& target, const std::string& encoder) {
  return {{"name", "toy-" + encoder},
          {"datasets", datasets},
          {"target", target},
          {"model", {{"type", "encoder"}, {"encoder", encoder}}},
          {"hyperparams", quick_hyperparams()},
          {"toy", true}};
}

}  // namespace fixture
