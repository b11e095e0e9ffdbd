#include "depkit/baselines.hpp"

#include <cstring>

#include "depkit/ensemble.hpp"
#include "depkit/error.hpp"
#include "depkit/text.hpp"

namespace depkit {

std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Majority: return "majority";
    case BaselineKind::TfidfLogreg: return "tfidf_logreg";
    case BaselineKind::DocvecLogreg: return "docvec_logreg";
  }
  return "?";
}

BaselineKind parse_baseline_kind(std::string_view s) {
  if (s == "majority") return BaselineKind::Majority;
  if (s == "tfidf_logreg" || s == "tfidf") return BaselineKind::TfidfLogreg;
  if (s == "docvec_logreg" || s == "doc2vec" || s == "docvec") return BaselineKind::DocvecLogreg;
  throw Error(ErrorKind::ConfigError, "unknown baseline kind '" + std::string(s) + "'");
}

nlohmann::json to_json(const BaselineConfig& c) {
  return {{"logreg", {{"C", c.logreg.C}, {"max_iter", c.logreg.max_iter}, {"multinomial", true}}},
          {"tfidf", {{"tokens", "lowercased words, length >= 2"}, {"idf", "smooth"}, {"norm", "l2"}}},
          {"docvec",
           {{"mode", "distributed memory"},
            {"dimensions", c.docvec.dimensions},
            {"epochs", c.docvec.epochs},
            {"window", c.docvec.window},
            {"negative", c.docvec.negative},
            {"seed", c.docvec.seed}}}};
}

namespace {

std::vector<std::string> texts_of(std::span<const Post> posts) {
  std::vector<std::string> out;
  out.reserve(posts.size());
  for (const auto& p : posts) out.push_back(p.text);
  return out;
}

}  // namespace

BaselineModel fit_baseline(BaselineKind kind, const LabeledDataset& train, const BaselineConfig& config) {
  BaselineModel m;
  m.kind_ = kind;
  m.schema_ = train.schema();
  m.config_ = config;
  const auto labels = train.labels();
  const int classes = train.schema().size();

  std::vector<std::size_t> counts(static_cast<std::size_t>(classes), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (int c = 1; c < classes; ++c)
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(m.majority_)]) m.majority_ = c;

  if (kind == BaselineKind::Majority) return m;

  const auto texts = texts_of(train.posts());
  std::vector<SparseRow> rows;
  rows.reserve(texts.size());
  std::size_t dims = 0;
  if (kind == BaselineKind::TfidfLogreg) {
    m.tfidf_.fit(texts);
    for (const auto& t : texts) rows.push_back(m.tfidf_.transform(t));
    dims = m.tfidf_.dimensions();
  } else {
    auto vecs = m.docvec_.fit(texts, config.docvec);
    for (const auto& v : vecs) rows.push_back(dense_to_sparse(v));
    dims = static_cast<std::size_t>(config.docvec.dimensions);
  }
  m.logreg_.fit(rows, labels, classes, dims, config.logreg);
  return m;
}

ProbabilityMatrix predict_baseline_proba(const BaselineModel& model, std::span<const Post> posts) {
  if (posts.empty()) throw Error(ErrorKind::EmptyInput, "no posts to predict");
  const auto classes = static_cast<std::size_t>(model.schema_.size());
  std::vector<double> values(posts.size() * classes, 0.0);
  std::vector<std::string> ids;
  ids.reserve(posts.size());
  for (std::size_t i = 0; i < posts.size(); ++i) {
    ids.push_back(posts[i].id);
    std::vector<double> row;
    switch (model.kind_) {
      case BaselineKind::Majority:
        values[i * classes + static_cast<std::size_t>(model.majority_)] = 1.0;
        continue;
      case BaselineKind::TfidfLogreg:
        row = model.logreg_.predict_proba(model.tfidf_.transform(posts[i].text));
        break;
      case BaselineKind::DocvecLogreg:
        row = model.logreg_.predict_proba(dense_to_sparse(model.docvec_.infer(posts[i].text)));
        break;
    }
    std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(i * classes));
  }
  return {std::move(ids), static_cast<int>(classes), std::move(values)};
}

std::vector<int> predict_baseline(const BaselineModel& model, std::span<const Post> posts) {
  return hard_labels(predict_baseline_proba(model, posts));
}

namespace {

constexpr char kBlobMagic[4] = {'D', 'P', 'K', 'B'};
constexpr std::uint32_t kBlobVersion = 1;

}  // namespace

void save_baseline(const std::filesystem::path& dir, const BaselineModel& model) {
  std::filesystem::create_directories(dir);
  binio::Writer w;
  w.raw(std::string_view(kBlobMagic, 4));
  w.put<std::uint32_t>(kBlobVersion);
  w.put<std::int32_t>(static_cast<std::int32_t>(model.kind_));
  w.put(std::string_view(model.schema_.name()));
  w.put<std::uint64_t>(model.schema_.levels().size());
  for (const auto& l : model.schema_.levels()) w.put(std::string_view(l));
  w.put<std::int32_t>(model.majority_);
  w.put(model.config_.logreg.C);
  w.put<std::int32_t>(model.config_.logreg.max_iter);
  if (model.kind_ == BaselineKind::TfidfLogreg) model.tfidf_.write(w);
  if (model.kind_ == BaselineKind::DocvecLogreg) model.docvec_.write(w);
  if (model.kind_ != BaselineKind::Majority) model.logreg_.write(w);
  text::write_file_atomic(dir / "model.bin", w.bytes());

  nlohmann::json manifest = {{"format", "depkit-baseline"},
                             {"version", kBlobVersion},
                             {"kind", to_string(model.kind_)},
                             {"schema", {{"name", model.schema_.name()}, {"levels", model.schema_.levels()}}},
                             {"hyperparameters", to_json(model.config_)},
                             {"seed", model.config_.docvec.seed}};
  if (model.kind_ == BaselineKind::Majority) manifest["majority_label"] = model.majority_;
  text::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

BaselineModel load_baseline(const std::filesystem::path& dir) {
  const std::string blob = text::read_file(dir / "model.bin");
  binio::Reader r(blob);
  if (r.raw(4) != std::string_view(kBlobMagic, 4)) throw Error(ErrorKind::CorruptCheckpoint, "not a baseline blob");
  if (r.get<std::uint32_t>() != kBlobVersion) throw Error(ErrorKind::CorruptCheckpoint, "unsupported baseline blob version");
  BaselineModel m;
  const auto kind = r.get<std::int32_t>();
  if (kind < 0 || kind > 2) throw Error(ErrorKind::CorruptCheckpoint, "unknown baseline kind");
  m.kind_ = static_cast<BaselineKind>(kind);
  auto name = r.get_string();
  std::vector<std::string> levels(r.get<std::uint64_t>());
  for (auto& l : levels) l = r.get_string();
  m.schema_ = LabelSchema(std::move(name), std::move(levels));
  m.majority_ = r.get<std::int32_t>();
  m.config_.logreg.C = r.get<double>();
  m.config_.logreg.max_iter = r.get<std::int32_t>();
  if (m.kind_ == BaselineKind::TfidfLogreg) m.tfidf_ = TfidfVectorizer::read(r);
  if (m.kind_ == BaselineKind::DocvecLogreg) {
    m.docvec_ = DocVecModel::read(r);
    m.config_.docvec = m.docvec_.options();
  }
  if (m.kind_ != BaselineKind::Majority) m.logreg_ = LogisticRegression::read(r);
  if (!r.done()) throw Error(ErrorKind::CorruptCheckpoint, "trailing bytes in baseline blob");
  return m;
}

}  // namespace depkit
