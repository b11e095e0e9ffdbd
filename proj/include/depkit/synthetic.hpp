#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "depkit/corpus.hpp"

namespace depkit::synthetic {

// Posts made of shared filler words plus a few keywords unique to the
// post's class, so the classes are separable from vocabulary alone.
struct CorpusOptions {
  std::string name = "toy";
  int classes = 3;
  std::size_t train = 120;
  std::size_t validation = 30;
  std::size_t test = 30;
  int keywords_per_class = 4;
  int keywords_per_post = 2;
  int filler_per_post = 8;
  int filler_vocabulary = 40;
  std::uint64_t seed = 7;
};

struct CorpusSplits {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

// Schema "<name>-<classes>level" with levels level0..levelN unless a schema is
// supplied; its size must equal options.classes.
CorpusSplits keyword_corpus(const CorpusOptions& options);
CorpusSplits keyword_corpus(const CorpusOptions& options, const LabelSchema& schema);

// A dataset whose label counts are exactly `counts` (level i gets counts[i]
// posts), in shuffled order. Texts are filler only.
LabeledDataset with_counts(const std::string& name, const LabelSchema& schema, std::span<const std::size_t> counts,
                           Split split, std::uint64_t seed = 1);

}  // namespace depkit::synthetic
