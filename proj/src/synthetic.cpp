#include "depkit/synthetic.hpp"

#include <algorithm>
#include <random>

#include "depkit/error.hpp"

namespace depkit::synthetic {

namespace {

std::string keyword(int cls, int j) {
  static constexpr const char* kStems[] = {"calm", "heavy", "dark", "numb", "lost", "hope", "tired", "empty"};
  return std::string(kStems[static_cast<std::size_t>(cls) % 8]) + "x" + std::to_string(cls) + "k" + std::to_string(j);
}

LabeledDataset make_split(const CorpusOptions& o, const LabelSchema& schema, std::size_t count, Split split,
                          std::mt19937_64& rng) {
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(o.classes));
  std::shuffle(labels.begin(), labels.end(), rng);
  std::uniform_int_distribution<int> filler(0, o.filler_vocabulary - 1);
  std::uniform_int_distribution<int> kw(0, o.keywords_per_class - 1);
  std::vector<LabeledItem> items;
  items.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::string> words;
    for (int f = 0; f < o.filler_per_post; ++f) words.push_back("w" + std::to_string(filler(rng)));
    for (int k = 0; k < o.keywords_per_post; ++k) words.push_back(keyword(labels[i], kw(rng)));
    std::shuffle(words.begin(), words.end(), rng);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    items.push_back({{o.name + "-" + std::string(to_string(split)) + "-" + std::to_string(i), text}, labels[i]});
  }
  return {o.name, schema, std::move(items), split};
}

}  // namespace

CorpusSplits keyword_corpus(const CorpusOptions& options) {
  std::vector<std::string> levels;
  for (int c = 0; c < options.classes; ++c) levels.push_back("level" + std::to_string(c));
  return keyword_corpus(options, LabelSchema(options.name + "-" + std::to_string(options.classes) + "level", levels));
}

CorpusSplits keyword_corpus(const CorpusOptions& options, const LabelSchema& schema) {
  if (schema.size() != options.classes) throw Error(ErrorKind::SchemaMismatch, "schema size differs from class count");
  std::mt19937_64 rng(options.seed);
  auto train = make_split(options, schema, options.train, Split::Train, rng);
  auto validation = make_split(options, schema, options.validation, Split::Validation, rng);
  auto test = make_split(options, schema, options.test, Split::Test, rng);
  return {std::move(train), std::move(validation), std::move(test)};
}

LabeledDataset with_counts(const std::string& name, const LabelSchema& schema, std::span<const std::size_t> counts,
                           Split split, std::uint64_t seed) {
  if (static_cast<int>(counts.size()) != schema.size()) throw Error(ErrorKind::SchemaMismatch, "one count per level");
  std::vector<int> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  std::uniform_int_distribution<int> filler(0, 199);
  std::vector<LabeledItem> items;
  items.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::string text = "w" + std::to_string(filler(rng)) + " w" + std::to_string(filler(rng)) + " w" + std::to_string(filler(rng));
    items.push_back({{name + "-" + std::to_string(i), text}, labels[i]});
  }
  return {name, schema, std::move(items), split};
}

}  // namespace depkit::synthetic
