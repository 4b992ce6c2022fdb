#ifndef EMBNLI_INIT_HPP
#define EMBNLI_INIT_HPP

#include "embnli/common.hpp"

#include <cmath>
#include <random>
#include <string>
#include <string_view>

namespace embnli {

enum class InitScheme { gaussian, orthogonal };

std::string_view to_string(InitScheme s);
InitScheme parse_init_scheme(std::string_view name);

struct InitSpec {
  InitScheme scheme = InitScheme::gaussian;
  double kappa = 1.0;
  int num_layers = 2;
  std::uint64_t seed = 0;
  /// Also multiply orthogonal blocks by (1/sqrt 2)^L.
  bool ortho_depth_correction = false;

  void validate() const {
    if (!(kappa > 0) || !std::isfinite(kappa)) throw UsageError("init kappa must be positive and finite");
    if (num_layers < 1) throw UsageError("init num_layers must be at least 1");
  }

  /// kappa * (1/sqrt 2)^L
  [[nodiscard]] double depth_scaled_kappa() const { return kappa * std::pow(std::sqrt(0.5), num_layers); }

  [[nodiscard]] InitSpec with_seed(std::uint64_t s) const {
    InitSpec copy = *this;
    copy.seed = s;
    return copy;
  }
};

/// I.i.d. N(0, (kappa (1/sqrt 2)^L)^2).
template <typename Scalar = double>
Matrix<Scalar> gaussian_init(Eigen::Index rows, Eigen::Index cols, const InitSpec& spec) {
  spec.validate();
  if (rows < 1 || cols < 1) throw UsageError("gaussian_init: shape must be positive");
  if (spec.scheme != InitScheme::gaussian) throw UsageError("gaussian_init called with a non-gaussian spec");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = spec.depth_scaled_kappa();
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(sd * normal(rng));
  return m;
}

namespace detail {

/// Haar-distributed n x n orthogonal matrix: Q of a Gaussian matrix's QR,
/// with columns sign-corrected by diag(R).
inline Matrix<double> haar_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<double> g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix<double>> qr(g);
  Matrix<double> q = qr.householderQ();
  const auto& r = qr.matrixQR();
  for (Eigen::Index k = 0; k < n; ++k)
    if (r(k, k) < 0) q.col(k) = -q.col(k);
  return q;
}

}  // namespace detail

/// Tiles the matrix with square b x b blocks, each an independent
/// Haar-random orthogonal matrix times kappa. `block` = 0 means
/// b = min(rows, cols); the model passes b = d, so a 4d x 2d LSTM matrix gets
/// 8 blocks.
template <typename Scalar = double>
Matrix<Scalar> orthogonal_init(Eigen::Index rows, Eigen::Index cols, const InitSpec& spec, Eigen::Index block = 0) {
  spec.validate();
  if (rows < 1 || cols < 1) throw UsageError("orthogonal_init: shape must be positive");
  if (block < 0) throw UsageError("orthogonal_init: negative block size");
  if (spec.scheme != InitScheme::orthogonal) throw UsageError("orthogonal_init called with a non-orthogonal spec");
  const Eigen::Index b = block > 0 ? block : std::min(rows, cols);
  if (rows % b != 0 || cols % b != 0)
    throw UsageError("orthogonal_init: " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " is not tiled by square " + std::to_string(b) + "x" + std::to_string(b) + " blocks");
  const double scale = spec.ortho_depth_correction ? spec.depth_scaled_kappa() : spec.kappa;
  std::mt19937_64 rng(spec.seed);
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index bi = 0; bi < rows / b; ++bi)
    for (Eigen::Index bj = 0; bj < cols / b; ++bj)
      m.block(bi * b, bj * b, b, b) = (scale * detail::haar_orthogonal(b, rng)).template cast<Scalar>();
  return m;
}

/// Orthonormal rows (wide) or columns (tall) times kappa, for shapes that the
/// square tiling cannot cover (e.g. a labels x d softmax matrix).
template <typename Scalar = double>
Matrix<Scalar> semi_orthogonal_init(Eigen::Index rows, Eigen::Index cols, const InitSpec& spec) {
  spec.validate();
  const Eigen::Index n = std::max(rows, cols);
  std::mt19937_64 rng(spec.seed);
  Matrix<double> q = detail::haar_orthogonal(n, rng);
  const double scale = spec.ortho_depth_correction ? spec.depth_scaled_kappa() : spec.kappa;
  return (scale * q.topLeftCorner(rows, cols)).template cast<Scalar>();
}

/// The scheme's initializer for a weight matrix of the given shape. Under the
/// orthogonal scheme, shapes that square blocks do not tile fall back to
/// semi_orthogonal_init.
template <typename Scalar = double>
Matrix<Scalar> init_weight(Eigen::Index rows, Eigen::Index cols, const InitSpec& spec, Eigen::Index block = 0) {
  if (spec.scheme == InitScheme::gaussian) return gaussian_init<Scalar>(rows, cols, spec);
  const Eigen::Index b = block > 0 ? block : std::min(rows, cols);
  if (b > 1 && rows % b == 0 && cols % b == 0) return orthogonal_init<Scalar>(rows, cols, spec, b);
  return semi_orthogonal_init<Scalar>(rows, cols, spec);
}

}  // namespace embnli

#endif  // EMBNLI_INIT_HPP
