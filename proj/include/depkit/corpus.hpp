#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace depkit {

struct Post {
  std::string id;
  std::string text;

  friend bool operator==(const Post&, const Post&) = default;
};

// Title and body are joined as "<title> : <body>"; either side may be empty.
std::string compose_post_text(std::string_view title, std::string_view body);

// Ordered depression levels. Index i is levels()[i]; equality compares the
// level names only, so two schemas with different display names but the same
// levels are interchangeable.
class LabelSchema {
 public:
  LabelSchema() = default;
  LabelSchema(std::string name, std::vector<std::string> levels);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& levels() const { return levels_; }
  int size() const { return static_cast<int>(levels_.size()); }
  const std::string& level_name(int index) const;
  std::optional<int> index_of(std::string_view level) const;

  friend bool operator==(const LabelSchema& a, const LabelSchema& b) { return a.levels_ == b.levels_; }

 private:
  std::string name_;
  std::vector<std::string> levels_;
};

// Built-ins: "reddit" (3 levels), "twitter" (4 levels), "depression-3level".
LabelSchema builtin_schema(std::string_view name);
// JSON document {"name": ..., "levels": [...]}.
LabelSchema load_schema(const std::filesystem::path& path);
// Built-in name or path to a schema file.
LabelSchema resolve_schema(std::string_view name_or_path);

enum class Split { Train, Validation, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view s);

struct LabeledItem {
  Post post;
  int label = 0;

  friend bool operator==(const LabeledItem&, const LabeledItem&) = default;
};

class LabeledDataset {
 public:
  LabeledDataset(std::string name, LabelSchema schema, std::vector<LabeledItem> items, Split split);

  const std::string& name() const { return name_; }
  const LabelSchema& schema() const { return schema_; }
  const std::vector<LabeledItem>& items() const { return items_; }
  Split split() const { return split_; }
  std::size_t size() const { return items_.size(); }

  std::vector<int> labels() const;
  std::vector<Post> posts() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::string name_;
  LabelSchema schema_;
  std::vector<LabeledItem> items_;
  Split split_;
};

// Rows of `a` followed by rows of `b`; used to train on train + validation.
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b, Split split);

// Tab-separated file with header `pid<TAB>text<TAB>label`. The label column
// holds a level name or an integer index. The dataset name defaults to the
// file stem.
LabeledDataset load_dataset(const std::filesystem::path& path, const LabelSchema& schema, Split split,
                            std::optional<std::string> name = std::nullopt);
void write_dataset(const std::filesystem::path& path, const LabeledDataset& ds);

struct ClassShare {
  int level = 0;
  std::size_t count = 0;
  double fraction = 0.0;
};
std::vector<ClassShare> class_distribution(const LabeledDataset& ds);

class LabelMapping {
 public:
  // Throws InvalidMapping when a source index lacks an image or maps out of
  // range, SchemaMismatch when the image does not cover the target.
  LabelMapping(LabelSchema source, LabelSchema target, std::vector<int> map);

  const LabelSchema& source() const { return source_; }
  const LabelSchema& target() const { return target_; }
  const std::vector<int>& map() const { return map_; }
  int operator()(int source_index) const { return map_.at(static_cast<std::size_t>(source_index)); }
  bool is_identity() const;

  static LabelMapping identity(const LabelSchema& schema);

 private:
  LabelSchema source_;
  LabelSchema target_;
  std::vector<int> map_;
};

// "twitter-to-3level": {0->0, 1->1, 2->1, 3->2}.
LabelMapping builtin_mapping(std::string_view name);
// Lines of the form `source_index -> target_index`; '#' starts a comment.
LabelMapping load_mapping(const std::filesystem::path& path, const LabelSchema& source, const LabelSchema& target);

// Relabels every item through the mapping. Datasets passed through a
// non-identity mapping are renamed "<name>-merged".
LabeledDataset merge_labels(const LabeledDataset& ds, const LabelMapping& mapping);

}  // namespace depkit
