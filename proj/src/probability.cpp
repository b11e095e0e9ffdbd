#include "depkit/probability.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "depkit/error.hpp"
#include "depkit/text.hpp"

namespace depkit {

ProbabilityMatrix::ProbabilityMatrix(std::vector<std::string> post_ids, int classes, std::vector<double> values)
    : post_ids_(std::move(post_ids)), classes_(classes), values_(std::move(values)) {
  if (classes_ < 1) throw Error(ErrorKind::ShapeMismatch, "probability matrix needs at least one class");
  if (values_.size() != post_ids_.size() * static_cast<std::size_t>(classes_))
    throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(post_ids_.size()) + "x" +
                                              std::to_string(classes_) + " values, got " + std::to_string(values_.size()));
  for (std::size_t r = 0; r < rows(); ++r) {
    double sum = 0.0;
    for (double v : row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::ShapeMismatch, "row '" + post_ids_[r] + "' has a negative or non-finite entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw Error(ErrorKind::ShapeMismatch, "row '" + post_ids_[r] + "' sums to " + std::to_string(sum));
  }
}

std::span<const double> ProbabilityMatrix::row(std::size_t r) const {
  const auto w = static_cast<std::size_t>(classes_);
  return std::span<const double>(values_).subspan(r * w, w);
}

void write_probability_matrix(const std::filesystem::path& path, const ProbabilityMatrix& pm) {
  std::ostringstream out;
  out << "pid";
  for (int c = 0; c < pm.classes(); ++c) out << "\tp" << c;
  out << '\n';
  char buf[40];
  for (std::size_t r = 0; r < pm.rows(); ++r) {
    out << text::escape_field(pm.post_ids()[r]);
    for (double v : pm.row(r)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  text::write_file_atomic(path, out.str());
}

ProbabilityMatrix read_probability_matrix(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingMemberRun, "no probability matrix at " + path.string());
  std::istringstream in(text::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedRow, path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = text::split(line, '\t');
  if (header.size() < 2 || header[0] != "pid") throw Error(ErrorKind::MalformedRow, path.string() + ": bad header");
  const int classes = static_cast<int>(header.size()) - 1;
  for (int c = 0; c < classes; ++c)
    if (header[static_cast<std::size_t>(c) + 1] != "p" + std::to_string(c))
      throw Error(ErrorKind::MalformedRow, path.string() + ": bad header column " + std::to_string(c + 1));
  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = text::split(line, '\t');
    if (cols.size() != header.size())
      throw Error(ErrorKind::MalformedRow, path.string() + ":" + std::to_string(line_no) + ": column count");
    ids.push_back(text::unescape_field(cols[0]));
    for (std::size_t c = 1; c < cols.size(); ++c) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cols[c].data(), cols[c].data() + cols[c].size(), v);
      if (ec != std::errc() || ptr != cols[c].data() + cols[c].size())
        throw Error(ErrorKind::MalformedRow, path.string() + ":" + std::to_string(line_no) + ": bad number");
      values.push_back(v);
    }
  }
  return {std::move(ids), classes, std::move(values)};
}

}  // namespace depkit
