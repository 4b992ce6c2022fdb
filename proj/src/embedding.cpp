#include "embnli/embedding.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace embnli {

EmbeddingMatrix<double> load_embeddings(std::istream& in, std::optional<Eigen::Index> expected_dim) {
  std::vector<std::string> vocab;
  std::vector<double> values;
  Eigen::Index d = -1;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> first_seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    const auto here = "line " + std::to_string(line_no) + ": ";
    const auto row_dim = static_cast<Eigen::Index>(fields.size()) - 1;
    if (row_dim < 1) throw DataError(here + "token without vector");
    if (d < 0) {
      d = row_dim;
      if (expected_dim && *expected_dim != d)
        throw DataError(here + "dimension " + std::to_string(d) + " does not match expected " +
                        std::to_string(*expected_dim));
    } else if (row_dim != d) {
      throw DataError(here + "dimension mismatch (" + std::to_string(row_dim) + " values, expected " +
                      std::to_string(d) + ")");
    }
    std::string token(fields[0]);
    if (auto [it, inserted] = first_seen.emplace(token, line_no); !inserted)
      throw DataError(here + "duplicate token '" + token + "' (first at line " + std::to_string(it->second) + ")");
    for (std::size_t k = 1; k < fields.size(); ++k) {
      double v = 0;
      if (!parse_double(fields[k], v)) throw DataError(here + "unparseable float '" + std::string(fields[k]) + "'");
      values.push_back(v);
    }
    vocab.push_back(std::move(token));
  }
  if (vocab.empty()) throw DataError("no rows");
  Matrix<double> m(static_cast<Eigen::Index>(vocab.size()), d);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = values[static_cast<std::size_t>(i * d + k)];
  return EmbeddingMatrix<double>(std::move(vocab), std::move(m));
}

EmbeddingMatrix<double> load_embeddings(const std::filesystem::path& path, std::optional<Eigen::Index> expected_dim) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path.string() + "'");
  try {
    return load_embeddings(in, expected_dim);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_embeddings(std::ostream& out, const EmbeddingMatrix<double>& e) {
  const auto& v = e.vectors();
  std::string line;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    line = e.token(i);
    for (Eigen::Index k = 0; k < e.dim(); ++k) {
      line += ' ';
      line += format_double(v(i, k), 9);
    }
    line += '\n';
    out << line;
  }
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix<double>& e) {
  write_file_atomic(path, [&](std::ostream& out) { save_embeddings(out, e); });
}

}  // namespace embnli
