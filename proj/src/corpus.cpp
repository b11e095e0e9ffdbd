#include "depkit/corpus.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <unordered_set>

#include "depkit/error.hpp"
#include "depkit/text.hpp"

namespace depkit {

std::string compose_post_text(std::string_view title, std::string_view body) {
  auto t = text::trim(title);
  auto b = text::trim(body);
  if (t.empty()) return std::string(b);
  if (b.empty()) return std::string(t);
  return std::string(t) + " : " + std::string(b);
}

LabelSchema::LabelSchema(std::string name, std::vector<std::string> levels)
    : name_(std::move(name)), levels_(std::move(levels)) {
  if (levels_.size() < 2) throw Error(ErrorKind::InvalidSchema, "schema '" + name_ + "' needs at least 2 levels");
  std::set<std::string> seen;
  for (const auto& l : levels_) {
    if (l.empty()) throw Error(ErrorKind::InvalidSchema, "empty level name in schema '" + name_ + "'");
    if (!seen.insert(l).second) throw Error(ErrorKind::InvalidSchema, "duplicate level '" + l + "'");
  }
}

const std::string& LabelSchema::level_name(int index) const {
  if (index < 0 || index >= size()) throw Error(ErrorKind::LabelOutOfRange, "level " + std::to_string(index));
  return levels_[static_cast<std::size_t>(index)];
}

std::optional<int> LabelSchema::index_of(std::string_view level) const {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i] == level) return static_cast<int>(i);
  return std::nullopt;
}

LabelSchema builtin_schema(std::string_view name) {
  if (name == "reddit") return {"reddit", {"not_depressed", "moderate", "severe"}};
  if (name == "depression-3level") return {"depression-3level", {"not_depressed", "moderate", "severe"}};
  if (name == "twitter") return {"twitter", {"not_depressed", "change_of_feelings", "moderate", "severe"}};
  throw Error(ErrorKind::InvalidSchema, "no built-in schema named '" + std::string(name) + "'");
}

LabelSchema load_schema(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text::read_file(path));
    return LabelSchema(doc.at("name").get<std::string>(), doc.at("levels").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSchema, path.string() + ": " + e.what());
  }
}

LabelSchema resolve_schema(std::string_view name_or_path) {
  if (name_or_path == "reddit" || name_or_path == "twitter" || name_or_path == "depression-3level")
    return builtin_schema(name_or_path);
  return load_schema(std::filesystem::path(name_or_path));
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "validation" || s == "dev") return Split::Validation;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::ConfigError, "unknown split '" + std::string(s) + "'");
}

LabeledDataset::LabeledDataset(std::string name, LabelSchema schema, std::vector<LabeledItem> items, Split split)
    : name_(std::move(name)), schema_(std::move(schema)), items_(std::move(items)), split_(split) {
  if (items_.empty()) throw Error(ErrorKind::EmptyDataset, "dataset '" + name_ + "' has no items");
  for (const auto& it : items_)
    if (it.label < 0 || it.label >= schema_.size())
      throw Error(ErrorKind::UnknownLabel, "label " + std::to_string(it.label) + " for post '" + it.post.id + "'");
}

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(items_.size());
  for (const auto& it : items_) out.push_back(it.label);
  return out;
}

std::vector<Post> LabeledDataset::posts() const {
  std::vector<Post> out;
  out.reserve(items_.size());
  for (const auto& it : items_) out.push_back(it.post);
  return out;
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b, Split split) {
  if (!(a.schema() == b.schema()))
    throw Error(ErrorKind::SchemaMismatch, "cannot concatenate '" + a.name() + "' and '" + b.name() + "'");
  auto items = a.items();
  items.insert(items.end(), b.items().begin(), b.items().end());
  return {a.name(), a.schema(), std::move(items), split};
}

namespace {

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

LabeledDataset load_dataset(const std::filesystem::path& path, const LabelSchema& schema, Split split,
                            std::optional<std::string> name) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::DatasetNotFound, path.string());
  const std::string contents = text::read_file(path);
  std::string_view rest = contents;
  std::vector<LabeledItem> items;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    std::string_view line = strip_cr(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!header_seen) {
      if (line != "pid\ttext\tlabel") throw Error(ErrorKind::MalformedRow, where + ": expected header 'pid\\ttext\\tlabel'");
      header_seen = true;
      continue;
    }
    auto cols = text::split(line, '\t');
    if (cols.size() != 3)
      throw Error(ErrorKind::MalformedRow, where + ": expected 3 columns, got " + std::to_string(cols.size()));
    LabeledItem item;
    item.post.id = text::unescape_field(cols[0]);
    item.post.text = text::unescape_field(cols[1]);
    if (item.post.id.empty()) throw Error(ErrorKind::MalformedRow, where + ": empty pid");
    if (text::trim(item.post.text).empty()) throw Error(ErrorKind::EmptyText, where + ": empty text");
    auto label_field = text::trim(cols[2]);
    if (auto idx = schema.index_of(label_field)) {
      item.label = *idx;
    } else if (auto num = parse_int(label_field); num && *num >= 0 && *num < schema.size()) {
      item.label = *num;
    } else {
      throw Error(ErrorKind::UnknownLabel, where + ": '" + std::string(label_field) + "' not in schema '" + schema.name() + "'");
    }
    if (!ids.insert(item.post.id).second) throw Error(ErrorKind::DuplicateId, where + ": pid '" + item.post.id + "'");
    items.push_back(std::move(item));
  }
  if (!header_seen) throw Error(ErrorKind::MalformedRow, path.string() + ": missing header");
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, path.string());
  return {name.value_or(path.stem().string()), schema, std::move(items), split};
}

void write_dataset(const std::filesystem::path& path, const LabeledDataset& ds) {
  std::ostringstream out;
  out << "pid\ttext\tlabel\n";
  for (const auto& it : ds.items())
    out << text::escape_field(it.post.id) << '\t' << text::escape_field(it.post.text) << '\t'
        << ds.schema().level_name(it.label) << '\n';
  text::write_file_atomic(path, out.str());
}

std::vector<ClassShare> class_distribution(const LabeledDataset& ds) {
  std::vector<ClassShare> out(static_cast<std::size_t>(ds.schema().size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].level = static_cast<int>(i);
  for (const auto& it : ds.items()) ++out[static_cast<std::size_t>(it.label)].count;
  const auto n = static_cast<double>(ds.size());
  for (auto& s : out) s.fraction = static_cast<double>(s.count) / n;
  return out;
}

LabelMapping::LabelMapping(LabelSchema source, LabelSchema target, std::vector<int> map)
    : source_(std::move(source)), target_(std::move(target)), map_(std::move(map)) {
  if (static_cast<int>(map_.size()) != source_.size())
    throw Error(ErrorKind::InvalidMapping, "mapping defines " + std::to_string(map_.size()) + " of " +
                                               std::to_string(source_.size()) + " source levels");
  std::vector<bool> hit(static_cast<std::size_t>(target_.size()), false);
  for (int t : map_) {
    if (t < 0 || t >= target_.size()) throw Error(ErrorKind::InvalidMapping, "target index " + std::to_string(t) + " out of range");
    hit[static_cast<std::size_t>(t)] = true;
  }
  for (std::size_t t = 0; t < hit.size(); ++t)
    if (!hit[t])
      throw Error(ErrorKind::SchemaMismatch, "mapping image misses target level " + std::to_string(t) + " ('" +
                                                 target_.level_name(static_cast<int>(t)) + "')");
}

bool LabelMapping::is_identity() const {
  if (!(source_ == target_)) return false;
  for (std::size_t i = 0; i < map_.size(); ++i)
    if (map_[i] != static_cast<int>(i)) return false;
  return true;
}

LabelMapping LabelMapping::identity(const LabelSchema& schema) {
  std::vector<int> map(static_cast<std::size_t>(schema.size()));
  for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<int>(i);
  return {schema, schema, std::move(map)};
}

LabelMapping builtin_mapping(std::string_view name) {
  if (name == "twitter-to-3level")
    return {builtin_schema("twitter"), builtin_schema("depression-3level"), {0, 1, 1, 2}};
  throw Error(ErrorKind::InvalidMapping, "no built-in mapping named '" + std::string(name) + "'");
}

LabelMapping load_mapping(const std::filesystem::path& path, const LabelSchema& source, const LabelSchema& target) {
  std::vector<int> map(static_cast<std::size_t>(source.size()), -1);
  std::istringstream in(text::read_file(path));
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    auto arrow = line.find("->");
    // Each side is a level index or a level name.
    auto side = [&](std::string_view tok, const LabelSchema& schema) -> std::optional<int> {
      tok = text::trim(tok);
      if (auto i = parse_int(tok)) return i;
      return schema.index_of(tok);
    };
    auto src = arrow == std::string_view::npos ? std::nullopt : side(line.substr(0, arrow), source);
    auto dst = arrow == std::string_view::npos ? std::nullopt : side(line.substr(arrow + 2), target);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (!src || !dst) throw Error(ErrorKind::InvalidMapping, where + ": expected 'source -> target'");
    if (*src < 0 || *src >= source.size()) throw Error(ErrorKind::InvalidMapping, where + ": source index out of range");
    if (map[static_cast<std::size_t>(*src)] != -1) throw Error(ErrorKind::InvalidMapping, where + ": source index repeated");
    map[static_cast<std::size_t>(*src)] = *dst;
  }
  for (std::size_t i = 0; i < map.size(); ++i)
    if (map[i] == -1) throw Error(ErrorKind::InvalidMapping, path.string() + ": no image for source level " + std::to_string(i));
  return {source, target, std::move(map)};
}

LabeledDataset merge_labels(const LabeledDataset& ds, const LabelMapping& mapping) {
  if (!(ds.schema() == mapping.source()))
    throw Error(ErrorKind::SchemaMismatch, "dataset '" + ds.name() + "' uses schema '" + ds.schema().name() +
                                               "', mapping expects '" + mapping.source().name() + "'");
  if (mapping.is_identity()) return ds;
  auto items = ds.items();
  for (auto& it : items) it.label = mapping(it.label);
  return {ds.name() + "-merged", mapping.target(), std::move(items), ds.split()};
}

}  // namespace depkit
