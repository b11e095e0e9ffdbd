#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "depkit/binio.hpp"

namespace depkit {

// (feature index, value) pairs in increasing index order.
using SparseRow = std::vector<std::pair<std::uint32_t, double>>;

SparseRow dense_to_sparse(std::span<const double> dense);

// Raw term counts times smoothed idf = ln((1 + n) / (1 + df)) + 1, rows
// L2-normalized. Tokens are text::word_tokens (lowercased, length >= 2).
class TfidfVectorizer {
 public:
  void fit(std::span<const std::string> documents);
  SparseRow transform(const std::string& document) const;

  std::size_t dimensions() const { return idf_.size(); }
  const std::map<std::string, std::uint32_t>& vocabulary() const { return vocab_; }
  const std::vector<double>& idf() const { return idf_; }

  void write(binio::Writer& w) const;
  static TfidfVectorizer read(binio::Reader& r);

 private:
  std::map<std::string, std::uint32_t> vocab_;
  std::vector<double> idf_;
};

// Distributed-memory paragraph vectors with negative sampling: the document
// vector and the context words around each position are averaged and trained
// to predict the centre word.
struct DocVecOptions {
  int dimensions = 100;
  int epochs = 20;
  int window = 5;
  int negative = 5;
  double alpha = 0.025;
  double min_alpha = 0.0001;
  std::uint64_t seed = 1;
};

class DocVecModel {
 public:
  // Trains word, output and document vectors; returns one vector per document.
  std::vector<std::vector<double>> fit(std::span<const std::string> documents, const DocVecOptions& options);
  // Fits a fresh document vector with the word and output vectors frozen.
  std::vector<double> infer(const std::string& document) const;

  const DocVecOptions& options() const { return options_; }
  std::size_t vocabulary_size() const { return words_.size(); }

  void write(binio::Writer& w) const;
  static DocVecModel read(binio::Reader& r);

 private:
  std::vector<int> encode(const std::string& document) const;
  void build_noise_table();

  DocVecOptions options_;
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
  std::vector<double> counts_;
  std::vector<double> word_vecs_;
  std::vector<double> out_vecs_;
  std::vector<double> noise_cdf_;
};

}  // namespace depkit
