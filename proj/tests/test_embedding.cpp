#include "embnli/embedding.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace embnli;

namespace {

EmbeddingMatrix<double> from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<std::string> vocab;
  Matrix<double> m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    vocab.push_back("w" + std::to_string(i));
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return {vocab, m};
}

struct CaptureWarnings {
  std::vector<std::string> seen;
  WarningHandler previous;
  CaptureWarnings() {
    previous = set_warning_handler([this](const std::string& m) { seen.push_back(m); });
  }
  ~CaptureWarnings() { set_warning_handler(previous); }
};

}  // namespace

TEST_CASE("load reads tokens and rows") {
  std::istringstream in("a 1.0 0.0\nb 0.0 1.0\n");
  const auto e = load_embeddings(in);
  CHECK(e.vocab() == std::vector<std::string>{"a", "b"});
  CHECK(e.vectors() == Matrix<double>::Identity(2, 2));
}

TEST_CASE("load errors") {
  std::istringstream empty("");
  CHECK_THROWS_WITH_AS(load_embeddings(empty), doctest::Contains("no rows"), DataError);

  std::istringstream ragged("a 1.0\nb 1.0 2.0\n");
  CHECK_THROWS_WITH_AS(load_embeddings(ragged), doctest::Contains("line 2"), DataError);

  std::istringstream bad("a 1.0 x\n");
  CHECK_THROWS_AS(load_embeddings(bad), DataError);

  std::istringstream dup("a 1\na 2\n");
  CHECK_THROWS_AS(load_embeddings(dup), DataError);

  std::istringstream wrong_dim("a 1 2\n");
  CHECK_THROWS_AS(load_embeddings(wrong_dim, 3), DataError);
}

TEST_CASE("save then load round-trips at nine significant digits") {
  const auto e = random_embeddings<double>({"x", "y", "z"}, 4, 1.0, 3);
  std::stringstream buf;
  save_embeddings(buf, e);
  const auto back = load_embeddings(buf);
  CHECK(back.vocab() == e.vocab());
  CHECK((back.vectors() - e.vectors()).cwiseAbs().maxCoeff() < 1e-8);

  const auto path = std::filesystem::temp_directory_path() / "embnli_test_roundtrip.txt";
  save_embeddings(path, e);
  CHECK(load_embeddings(path).vocab() == e.vocab());
  std::filesystem::remove(path);
}

TEST_CASE("random embeddings") {
  const auto a = random_embeddings<double>({"a", "b"}, 5, 0.7, 42);
  const auto b = random_embeddings<double>({"a", "b"}, 5, 0.7, 42);
  CHECK(a.vectors() == b.vectors());
  CHECK(random_embeddings<double>({"a"}, 3, 0.0, 1).vectors().isZero());

  std::vector<std::string> vocab(1000);
  for (std::size_t i = 0; i < vocab.size(); ++i) vocab[i] = std::to_string(i);
  const auto big = random_embeddings<double>(vocab, 1000, 1.0, 7);
  const double mean = big.vectors().mean();
  const double sd = std::sqrt((big.vectors().array() - mean).square().mean());
  CHECK(std::abs(sd - 1.0) < 0.01);
}

TEST_CASE("mean_center") {
  CHECK(mean_center(from_rows({{1, 0}, {-1, 0}})).vectors() == from_rows({{1, 0}, {-1, 0}}).vectors());
  CHECK(mean_center(from_rows({{2, 4}, {0, 0}})).vectors() == from_rows({{1, 2}, {-1, -2}}).vectors());
  CHECK(mean_center(from_rows({{3, 3}})).vectors().isZero());
}

TEST_CASE("rescale_unit_std") {
  const auto r = rescale_unit_std(from_rows({{2, 1}, {-2, -1}}));
  CHECK(r.vectors() == from_rows({{1, 1}, {-1, -1}}).vectors());

  CaptureWarnings w;
  const auto c = rescale_unit_std(from_rows({{5, 1}, {5, 2}, {5, 3}}));
  CHECK(c.vectors().col(0) == Vector<double>::Constant(3, 5));
  REQUIRE(w.seen.size() == 1);
  CHECK(w.seen[0].find("0") != std::string::npos);
}

TEST_CASE("preprocess contract and idempotence") {
  const auto e = random_embeddings<double>({"a", "b", "c", "d", "e"}, 6, 3.0, 9);
  const auto p = preprocess(e);
  const Matrix<double>& v = p.vectors();
  CHECK(v.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index j = 0; j < v.cols(); ++j) CHECK(std::abs(std::sqrt(v.col(j).squaredNorm() / 5) - 1) < 1e-6);
  CHECK((preprocess(p).vectors() - v).cwiseAbs().maxCoeff() < 1e-9);

  const auto lin = preprocess(from_rows({{1, 10}, {2, 20}, {3, 30}}));
  const double c = std::sqrt(1.5);
  Matrix<double> expect(3, 2);
  expect << -c, -c, 0, 0, c, c;
  CHECK((lin.vectors() - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("task_embeddings picks rows and adds <unk>") {
  const auto src = from_rows({{1, 1}, {2, 2}, {3, 3}});
  const std::vector<std::string> tokens{"w2", "missing", "w0", "w2"};
  std::size_t missing = 0;
  const auto t = task_embeddings(src, std::span<const std::string>(tokens), 5, &missing);
  CHECK(missing == 1);
  CHECK(t.vocab() == std::vector<std::string>{kUnknownToken, "w2", "w0"});
  CHECK(t.row(1) == src.row(2));
  CHECK(t.row(2) == src.row(0));
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(EmbeddingMatrix<double>({"a"}, Matrix<double>::Zero(2, 2)), DataError);
  Matrix<double> nan = Matrix<double>::Zero(1, 1);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(EmbeddingMatrix<double>({"a"}, nan), NumericalError);
}
