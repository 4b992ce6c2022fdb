#ifndef EMBNLI_RETROFIT_HPP
#define EMBNLI_RETROFIT_HPP

#include "embnli/embedding.hpp"

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace embnli {

/// Undirected word graph. Symmetric, no self-loops.
class Lexicon {
 public:
  using Adjacency = std::map<std::string, std::set<std::string>>;

  Lexicon() = default;
  explicit Lexicon(Adjacency adjacency);

  static Lexicon from_edges(const std::vector<std::pair<std::string, std::string>>& edges);

  [[nodiscard]] const Adjacency& adjacency() const { return adjacency_; }
  [[nodiscard]] const std::set<std::string>& neighbors(const std::string& word) const;
  [[nodiscard]] std::size_t degree(const std::string& word) const { return neighbors(word).size(); }
  [[nodiscard]] std::size_t num_words() const { return adjacency_.size(); }
  [[nodiscard]] std::size_t num_edges() const;

 private:
  Adjacency adjacency_;
};

/// `word n1 n2 ...` per line. Tokens are ASCII-casefolded, edges symmetrized,
/// self-loops dropped.
Lexicon load_lexicon(std::istream& in);
Lexicon load_lexicon(const std::filesystem::path& path);

std::string casefold(std::string_view token);

enum class BetaRule {
  inverse_degree,  ///< beta_ji = 1 / deg(j)
  uniform,         ///< beta_ji = RetrofitConfig::uniform_beta
};

/// How objective_value weighs its terms.
enum class ObjectiveForm {
  /// sum_j w_j alpha_j |x~_j - x_j|^2 + sum_{undirected {i,j}} w_j beta_ji |x~_j - x~_i|^2,
  /// with w_j = deg(j) under inverse-degree beta and 1 under uniform beta. Each
  /// Gauss-Seidel update is the exact minimizer of this energy in x~_j, so it
  /// never increases across sweeps.
  sweep_energy,
  /// sum_j alpha_j |x~_j - x_j|^2 + sum_{directed (j,i)} beta_ji |x~_j - x~_i|^2,
  /// the literal per-word sum. Not monotone under the update in general.
  directed_sum,
};

struct RetrofitConfig {
  double alpha = 1.0;
  std::unordered_map<std::string, double> alpha_overrides;
  BetaRule beta_rule = BetaRule::inverse_degree;
  double uniform_beta = 1.0;
  int max_iterations = 10;
  /// Stop once a sweep moves no coordinate by more than this.
  double convergence_tol = 1e-6;
  ObjectiveForm objective = ObjectiveForm::sweep_energy;

  [[nodiscard]] double alpha_for(const std::string& token) const {
    auto it = alpha_overrides.find(token);
    return it == alpha_overrides.end() ? alpha : it->second;
  }
  void validate() const;
};

/// The lexicon projected onto embedding rows: neighbors[j] lists rows adjacent
/// to row j (sorted, no duplicates, no self-loops).
struct RowGraph {
  std::vector<std::vector<Eigen::Index>> neighbors;

  [[nodiscard]] std::size_t degree(Eigen::Index j) const { return neighbors[static_cast<std::size_t>(j)].size(); }
  [[nodiscard]] double beta(Eigen::Index j, const RetrofitConfig& cfg) const {
    if (cfg.beta_rule == BetaRule::uniform) return cfg.uniform_beta;
    return 1.0 / static_cast<double>(degree(j));
  }
  /// Per-word weight that symmetrizes beta: weight(j) * beta(j) is the same for both ends of an edge.
  [[nodiscard]] double weight(Eigen::Index j, const RetrofitConfig& cfg) const {
    return cfg.beta_rule == BetaRule::uniform ? 1.0 : static_cast<double>(degree(j));
  }
};

/// Embedding tokens are matched to lexicon words after casefolding; lexicon
/// words absent from the vocabulary are ignored.
RowGraph project_lexicon(const std::vector<std::string>& vocab, const Lexicon& lex);

namespace detail {

template <typename Scalar>
std::vector<double> row_alphas(const std::vector<std::string>& vocab, const RetrofitConfig& cfg) {
  std::vector<double> a(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) a[j] = cfg.alpha_for(vocab[j]);
  return a;
}

template <typename Scalar>
Scalar objective_on_graph(const Matrix<Scalar>& original, const Matrix<Scalar>& retro, const RowGraph& g,
                          const std::vector<double>& alphas, const RetrofitConfig& cfg) {
  Scalar total = 0;
  for (Eigen::Index j = 0; j < original.rows(); ++j) {
    const auto& nb = g.neighbors[static_cast<std::size_t>(j)];
    const Scalar w = nb.empty() ? Scalar(1)
                                : static_cast<Scalar>(cfg.objective == ObjectiveForm::sweep_energy ? g.weight(j, cfg)
                                                                                                    : 1.0);
    total += w * static_cast<Scalar>(alphas[static_cast<std::size_t>(j)]) *
             (retro.row(j) - original.row(j)).squaredNorm();
    if (nb.empty()) continue;
    const auto b = static_cast<Scalar>(g.beta(j, cfg));
    for (auto i : nb) {
      if (cfg.objective == ObjectiveForm::sweep_energy && i < j) continue;
      total += w * b * (retro.row(j) - retro.row(i)).squaredNorm();
    }
  }
  return total;
}

}  // namespace detail

template <typename Scalar>
Scalar objective_value(const EmbeddingMatrix<Scalar>& original, const EmbeddingMatrix<Scalar>& retro,
                       const Lexicon& lex, const RetrofitConfig& cfg) {
  if (original.vocab() != retro.vocab() || original.dim() != retro.dim())
    throw DataError("objective_value: vocabulary or dimension mismatch between matrices");
  const auto g = project_lexicon(original.vocab(), lex);
  return detail::objective_on_graph(original.vectors(), retro.vectors(), g,
                                    detail::row_alphas<Scalar>(original.vocab(), cfg), cfg);
}

/// Gauss-Seidel sweeps in vocabulary order of
///   x~_j <- (alpha_j x_j + sum_i beta_ji x~_i) / (alpha_j + sum_i beta_ji),
/// starting from x~ = x. Words without neighbors keep their vectors. If
/// `objective_trace` is given it receives objective_value before the first
/// sweep and after every sweep.
template <typename Scalar>
EmbeddingMatrix<Scalar> retrofit(const EmbeddingMatrix<Scalar>& e, const Lexicon& lex, const RetrofitConfig& cfg,
                                 std::vector<Scalar>* objective_trace = nullptr) {
  cfg.validate();
  const auto g = project_lexicon(e.vocab(), lex);
  const auto alphas = detail::row_alphas<Scalar>(e.vocab(), cfg);
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    if (alphas[static_cast<std::size_t>(j)] < 0) throw UsageError("alpha must be non-negative");
    if (g.neighbors[static_cast<std::size_t>(j)].empty() && alphas[static_cast<std::size_t>(j)] == 0)
      throw UsageError("alpha is zero for isolated word '" + e.token(j) + "'; update undefined");
  }

  const Matrix<Scalar>& x = e.vectors();
  Matrix<Scalar> xt = x;
  Vector<Scalar> acc(e.dim());
  if (objective_trace) objective_trace->push_back(detail::objective_on_graph(x, xt, g, alphas, cfg));

  for (int sweep = 0; sweep < cfg.max_iterations; ++sweep) {
    Scalar max_change = 0;
    for (Eigen::Index j = 0; j < e.size(); ++j) {
      const auto& nb = g.neighbors[static_cast<std::size_t>(j)];
      if (nb.empty()) continue;
      const auto a = static_cast<Scalar>(alphas[static_cast<std::size_t>(j)]);
      const auto b = static_cast<Scalar>(g.beta(j, cfg));
      acc = a * x.row(j).transpose();
      for (auto i : nb) acc += b * xt.row(i).transpose();
      acc /= a + b * static_cast<Scalar>(nb.size());
      max_change = std::max(max_change, (acc.transpose() - xt.row(j)).cwiseAbs().maxCoeff());
      xt.row(j) = acc.transpose();
    }
    if (objective_trace) objective_trace->push_back(detail::objective_on_graph(x, xt, g, alphas, cfg));
    if (max_change <= static_cast<Scalar>(cfg.convergence_tol)) break;
  }
  return e.with_vectors(std::move(xt));
}

}  // namespace embnli

#endif  // EMBNLI_RETROFIT_HPP
