#include "depkit/features.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "depkit/error.hpp"
#include "depkit/text.hpp"

namespace depkit {

SparseRow dense_to_sparse(std::span<const double> dense) {
  SparseRow row;
  row.reserve(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) row.emplace_back(static_cast<std::uint32_t>(i), dense[i]);
  return row;
}

void TfidfVectorizer::fit(std::span<const std::string> documents) {
  if (documents.empty()) throw Error(ErrorKind::EmptyDataset, "no documents for TF-IDF");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    auto toks = text::word_tokens(doc);
    std::set<std::string> uniq(toks.begin(), toks.end());
    for (const auto& t : uniq) ++df[t];
  }
  vocab_.clear();
  idf_.clear();
  const auto n = static_cast<double>(documents.size());
  for (const auto& [tok, count] : df) {
    vocab_.emplace(tok, static_cast<std::uint32_t>(idf_.size()));
    idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
  }
}

SparseRow TfidfVectorizer::transform(const std::string& document) const {
  std::map<std::uint32_t, double> tf;
  for (const auto& t : text::word_tokens(document)) {
    auto it = vocab_.find(t);
    if (it != vocab_.end()) tf[it->second] += 1.0;
  }
  SparseRow row;
  double norm = 0.0;
  for (const auto& [idx, count] : tf) {
    double v = count * idf_[idx];
    row.emplace_back(idx, v);
    norm += v * v;
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (auto& e : row) e.second /= norm;
  }
  return row;
}

void TfidfVectorizer::write(binio::Writer& w) const {
  w.put<std::uint64_t>(vocab_.size());
  for (const auto& [tok, idx] : vocab_) {
    w.put(std::string_view(tok));
    w.put<std::uint32_t>(idx);
  }
  w.put(idf_);
}

TfidfVectorizer TfidfVectorizer::read(binio::Reader& r) {
  TfidfVectorizer v;
  auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto tok = r.get_string();
    v.vocab_.emplace(std::move(tok), r.get<std::uint32_t>());
  }
  v.idf_ = r.get_vector<double>();
  if (v.idf_.size() != v.vocab_.size()) throw Error(ErrorKind::CorruptCheckpoint, "TF-IDF vocabulary and idf differ in size");
  return v;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<int> DocVecModel::encode(const std::string& document) const {
  std::vector<int> ids;
  for (const auto& t : text::word_tokens(document)) {
    auto it = index_.find(t);
    if (it != index_.end()) ids.push_back(it->second);
  }
  return ids;
}

void DocVecModel::build_noise_table() {
  noise_cdf_.assign(counts_.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    acc += std::pow(counts_[i], 0.75);
    noise_cdf_[i] = acc;
  }
  for (double& c : noise_cdf_) c /= acc;
}

namespace {

// One pass of PV-DM updates over a document. `word_upd` / `out_upd` alias the
// read tables when training and are null during inference, when only the
// document vector moves.
void dm_pass(std::span<const int> words, std::span<double> doc, const double* word_vecs, const double* out_vecs,
             double* word_upd, double* out_upd, const std::vector<double>& noise_cdf, const DocVecOptions& o,
             double alpha, std::mt19937_64& rng) {
  const auto d = static_cast<std::size_t>(o.dimensions);
  std::vector<double> h(d), neu1e(d);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<std::ptrdiff_t>(words.size());
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    std::copy(doc.begin(), doc.end(), h.begin());
    std::size_t count = 1;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, t - o.window);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, t + o.window);
    for (std::ptrdiff_t c = lo; c <= hi; ++c) {
      if (c == t) continue;
      const double* wv = word_vecs + static_cast<std::size_t>(words[static_cast<std::size_t>(c)]) * d;
      for (std::size_t k = 0; k < d; ++k) h[k] += wv[k];
      ++count;
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (double& v : h) v *= inv;
    std::fill(neu1e.begin(), neu1e.end(), 0.0);
    const int target = words[static_cast<std::size_t>(t)];
    for (int s = 0; s <= o.negative; ++s) {
      int w = target;
      double label = 1.0;
      if (s > 0) {
        w = static_cast<int>(std::upper_bound(noise_cdf.begin(), noise_cdf.end(), unif(rng)) - noise_cdf.begin());
        w = std::min<int>(w, static_cast<int>(noise_cdf.size()) - 1);
        if (w == target) continue;
        label = 0.0;
      }
      const std::size_t row = static_cast<std::size_t>(w) * d;
      const double* ov = out_vecs + row;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += h[k] * ov[k];
      const double g = (label - sigmoid(dot)) * alpha;
      for (std::size_t k = 0; k < d; ++k) neu1e[k] += g * ov[k];
      if (out_upd)
        for (std::size_t k = 0; k < d; ++k) out_upd[row + k] += g * h[k];
    }
    for (double& v : neu1e) v *= inv;
    for (std::size_t k = 0; k < d; ++k) doc[k] += neu1e[k];
    if (word_upd) {
      for (std::ptrdiff_t c = lo; c <= hi; ++c) {
        if (c == t) continue;
        double* wv = word_upd + static_cast<std::size_t>(words[static_cast<std::size_t>(c)]) * d;
        for (std::size_t k = 0; k < d; ++k) wv[k] += neu1e[k];
      }
    }
  }
}

void random_init(std::span<double> v, int dims, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5 / dims, 0.5 / dims);
  for (double& x : v) x = u(rng);
}

}  // namespace

std::vector<std::vector<double>> DocVecModel::fit(std::span<const std::string> documents, const DocVecOptions& options) {
  if (documents.empty()) throw Error(ErrorKind::EmptyDataset, "no documents for paragraph vectors");
  if (options.dimensions < 1 || options.epochs < 1 || options.window < 0 || options.negative < 0)
    throw Error(ErrorKind::ConfigError, "invalid paragraph-vector options");
  options_ = options;
  std::map<std::string, double> counts;
  for (const auto& doc : documents)
    for (const auto& t : text::word_tokens(doc)) counts[t] += 1.0;
  words_.clear();
  index_.clear();
  counts_.clear();
  for (const auto& [w, c] : counts) {
    index_.emplace(w, static_cast<int>(words_.size()));
    words_.push_back(w);
    counts_.push_back(c);
  }
  const auto d = static_cast<std::size_t>(options.dimensions);
  std::mt19937_64 rng(options.seed);
  word_vecs_.assign(words_.size() * d, 0.0);
  random_init(word_vecs_, options.dimensions, rng);
  out_vecs_.assign(words_.size() * d, 0.0);
  std::vector<std::vector<double>> docs(documents.size(), std::vector<double>(d));
  for (auto& v : docs) random_init(v, options.dimensions, rng);
  if (words_.empty()) return docs;
  build_noise_table();

  std::vector<std::vector<int>> encoded;
  for (const auto& doc : documents) encoded.push_back(encode(doc));
  const double total = static_cast<double>(options.epochs) * static_cast<double>(documents.size());
  double done = 0.0;
  for (int e = 0; e < options.epochs; ++e) {
    for (std::size_t i = 0; i < documents.size(); ++i, done += 1.0) {
      const double alpha = options.alpha - (options.alpha - options.min_alpha) * done / total;
      dm_pass(encoded[i], docs[i], word_vecs_.data(), out_vecs_.data(), word_vecs_.data(), out_vecs_.data(), noise_cdf_,
              options, alpha, rng);
    }
  }
  return docs;
}

std::vector<double> DocVecModel::infer(const std::string& document) const {
  const auto d = static_cast<std::size_t>(options_.dimensions);
  std::mt19937_64 rng(text::fnv1a(document, options_.seed * 0x9E3779B97F4A7C15ULL + 1));
  std::vector<double> doc(d);
  random_init(doc, options_.dimensions, rng);
  if (words_.empty()) return doc;
  auto ids = encode(document);
  for (int e = 0; e < options_.epochs; ++e) {
    const double alpha = options_.alpha - (options_.alpha - options_.min_alpha) * e / options_.epochs;
    dm_pass(ids, doc, word_vecs_.data(), out_vecs_.data(), nullptr, nullptr, noise_cdf_, options_, alpha, rng);
  }
  return doc;
}

void DocVecModel::write(binio::Writer& w) const {
  w.put<std::int32_t>(options_.dimensions);
  w.put<std::int32_t>(options_.epochs);
  w.put<std::int32_t>(options_.window);
  w.put<std::int32_t>(options_.negative);
  w.put(options_.alpha);
  w.put(options_.min_alpha);
  w.put<std::uint64_t>(options_.seed);
  w.put<std::uint64_t>(words_.size());
  for (const auto& word : words_) w.put(std::string_view(word));
  w.put(counts_);
  w.put(word_vecs_);
  w.put(out_vecs_);
}

DocVecModel DocVecModel::read(binio::Reader& r) {
  DocVecModel m;
  m.options_.dimensions = r.get<std::int32_t>();
  m.options_.epochs = r.get<std::int32_t>();
  m.options_.window = r.get<std::int32_t>();
  m.options_.negative = r.get<std::int32_t>();
  m.options_.alpha = r.get<double>();
  m.options_.min_alpha = r.get<double>();
  m.options_.seed = r.get<std::uint64_t>();
  auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    m.index_.emplace(r.get_string(), static_cast<int>(i));
  }
  m.words_.resize(n);
  for (const auto& [w, i] : m.index_) m.words_[static_cast<std::size_t>(i)] = w;
  m.counts_ = r.get_vector<double>();
  m.word_vecs_ = r.get_vector<double>();
  m.out_vecs_ = r.get_vector<double>();
  const auto d = static_cast<std::size_t>(m.options_.dimensions);
  if (m.counts_.size() != n || m.word_vecs_.size() != n * d || m.out_vecs_.size() != n * d)
    throw Error(ErrorKind::CorruptCheckpoint, "paragraph-vector tables have inconsistent sizes");
  if (n > 0) m.build_noise_table();
  return m;
}

}  // namespace depkit
