#ifndef EMBNLI_EMBEDDING_HPP
#define EMBNLI_EMBEDDING_HPP

#include "embnli/common.hpp"
#include "embnli/io.hpp"

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace embnli {

inline constexpr const char* kUnknownToken = "<unk>";

/// Vocabulary-indexed |V| x d matrix of word vectors. Immutable once built;
/// every transformation returns a new matrix.
template <typename Scalar = double>
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;

  EmbeddingMatrix(std::vector<std::string> vocab, Matrix<Scalar> vectors)
      : vocab_(std::move(vocab)), vectors_(std::move(vectors)) {
    if (vocab_.empty()) throw DataError("embedding matrix has no rows");
    if (static_cast<Eigen::Index>(vocab_.size()) != vectors_.rows())
      throw DataError("vocabulary size " + std::to_string(vocab_.size()) + " does not match row count " +
                      std::to_string(vectors_.rows()));
    if (vectors_.cols() < 1) throw DataError("embedding dimension must be positive");
    if (!vectors_.allFinite()) throw NumericalError("embedding matrix contains non-finite entries");
    index_.reserve(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
      if (!index_.emplace(vocab_[i], i).second) throw DataError("duplicate token '" + vocab_[i] + "'");
    }
  }

  [[nodiscard]] Eigen::Index size() const { return vectors_.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return vectors_.cols(); }
  [[nodiscard]] bool empty() const { return vocab_.empty(); }
  [[nodiscard]] const std::vector<std::string>& vocab() const { return vocab_; }
  [[nodiscard]] const Matrix<Scalar>& vectors() const { return vectors_; }
  [[nodiscard]] const std::string& token(Eigen::Index row) const { return vocab_.at(static_cast<std::size_t>(row)); }

  [[nodiscard]] std::optional<Eigen::Index> find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it->second);
  }

  [[nodiscard]] auto row(Eigen::Index i) const { return vectors_.row(i); }

  /// Same vocabulary, new vectors.
  [[nodiscard]] EmbeddingMatrix with_vectors(Matrix<Scalar> vectors) const {
    return EmbeddingMatrix(vocab_, std::move(vectors));
  }

  template <typename Other>
  [[nodiscard]] EmbeddingMatrix<Other> cast() const {
    return EmbeddingMatrix<Other>(vocab_, vectors_.template cast<Other>());
  }

 private:
  std::vector<std::string> vocab_;
  Matrix<Scalar> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// I.i.d. N(0, kappa^2) entries, a pure function of (vocab, d, kappa, seed).
template <typename Scalar = double>
EmbeddingMatrix<Scalar> random_embeddings(std::vector<std::string> vocab, Eigen::Index d, Scalar kappa,
                                          std::uint64_t seed) {
  if (d < 1) throw UsageError("embedding dimension must be positive");
  if (!(kappa >= 0)) throw UsageError("kappa must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<Scalar> m(static_cast<Eigen::Index>(vocab.size()), d);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < d; ++k) m(i, k) = kappa * static_cast<Scalar>(normal(rng));
  return EmbeddingMatrix<Scalar>(std::move(vocab), std::move(m));
}

template <typename Scalar>
EmbeddingMatrix<Scalar> mean_center(const EmbeddingMatrix<Scalar>& e) {
  if (e.empty()) throw DataError("cannot mean-center an empty matrix");
  const auto& v = e.vectors();
  Matrix<Scalar> centered = v.rowwise() - v.colwise().mean();
  return e.with_vectors(std::move(centered));
}

/// Divides each column by its population standard deviation. Columns with
/// zero variance are left as they are and reported through warn().
template <typename Scalar>
EmbeddingMatrix<Scalar> rescale_unit_std(const EmbeddingMatrix<Scalar>& e) {
  if (e.size() < 2) throw DataError("rescaling needs at least two rows");
  Matrix<Scalar> out = e.vectors();
  const auto n = static_cast<Scalar>(out.rows());
  std::vector<Eigen::Index> skipped;
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    auto col = out.col(k);
    const Scalar mean = col.mean();
    const Scalar var = (col.array() - mean).square().sum() / n;
    const Scalar sd = std::sqrt(var);
    const Scalar scale = std::max(Scalar(1), col.cwiseAbs().maxCoeff());
    if (!(sd > std::numeric_limits<Scalar>::epsilon() * scale)) {
      skipped.push_back(k);
      continue;
    }
    col /= sd;
  }
  if (!skipped.empty()) {
    std::string list;
    for (auto k : skipped) list += (list.empty() ? "" : ",") + std::to_string(k);
    warn("zero-variance embedding dimension(s) left unscaled: " + list);
  }
  return e.with_vectors(std::move(out));
}

template <typename Scalar>
EmbeddingMatrix<Scalar> preprocess(const EmbeddingMatrix<Scalar>& e) {
  return rescale_unit_std(mean_center(e));
}

/// Rows of `source` for `tokens` (in order), preceded by an `<unk>` row.
/// Tokens missing from `source` are dropped from the result; lookups for them
/// fall back to `<unk>`. If `source` already has `<unk>` that row is used,
/// otherwise it is drawn from random_embeddings with `seed`.
template <typename Scalar>
EmbeddingMatrix<Scalar> task_embeddings(const EmbeddingMatrix<Scalar>& source, std::span<const std::string> tokens,
                                        std::uint64_t seed, std::size_t* missing = nullptr) {
  std::vector<std::string> vocab{kUnknownToken};
  std::vector<Eigen::Index> rows;
  std::unordered_map<std::string, bool> seen{{kUnknownToken, true}};
  std::size_t n_missing = 0;
  for (const auto& t : tokens) {
    if (!seen.emplace(t, true).second) continue;
    if (auto r = source.find(t)) {
      vocab.push_back(t);
      rows.push_back(*r);
    } else {
      ++n_missing;
    }
  }
  if (missing) *missing = n_missing;
  Matrix<Scalar> m(static_cast<Eigen::Index>(vocab.size()), source.dim());
  if (auto unk = source.find(kUnknownToken)) {
    m.row(0) = source.row(*unk);
  } else {
    m.row(0) = random_embeddings<Scalar>({kUnknownToken}, source.dim(), Scalar(1), seed).vectors().row(0);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i) + 1) = source.row(rows[i]);
  return EmbeddingMatrix<Scalar>(std::move(vocab), std::move(m));
}

/// GloVe-style text: `token f1 ... fd` per line. Errors carry line numbers.
EmbeddingMatrix<double> load_embeddings(std::istream& in, std::optional<Eigen::Index> expected_dim = std::nullopt);
EmbeddingMatrix<double> load_embeddings(const std::filesystem::path& path,
                                        std::optional<Eigen::Index> expected_dim = std::nullopt);

/// Writes 9 significant digits per value, single-space separated, LF endings.
void save_embeddings(std::ostream& out, const EmbeddingMatrix<double>& e);
void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix<double>& e);

}  // namespace embnli

#endif  // EMBNLI_EMBEDDING_HPP
