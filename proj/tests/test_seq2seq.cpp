#include "embnli/seq2seq.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace embnli;

namespace {

struct Fixture {
  ModelConfig cfg;
  Matrix<double> E;
  ModelParams<double> params;
  std::vector<EncodedExample> batch;

  explicit Fixture(bool attention = true, double dropout = 0.2) {
    cfg.d = 6;
    cfg.layers = 2;
    cfg.attention = attention;
    cfg.dropout_p = dropout;
    cfg.window_D = 2;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    E.resize(10, cfg.d);
    for (auto& v : E.reshaped()) v = normal(rng);
    InitSpec spec;
    spec.seed = 2;
    params = init_params<double>(cfg, E, E, spec);
    std::uniform_int_distribution<int> tok(0, 9);
    for (int i = 0; i < 6; ++i) {
      EncodedExample ex;
      for (int t = 0; t < 2 + i; ++t) ex.premise.push_back(tok(rng));
      for (int t = 0; t < 1 + i % 3; ++t) ex.hypothesis.push_back(tok(rng));
      ex.label = i % 3;
      batch.push_back(ex);
    }
  }
};

double max_diff(const ModelParams<double>& a, const ModelParams<double>& b) {
  double worst = 0;
  visit_tensors(
      true, [&](const std::string&, const auto& x, const auto& y) { worst = std::max(worst, (x - y).cwiseAbs().maxCoeff()); },
      a, b);
  return worst;
}

}  // namespace

TEST_CASE("lstm_step with zero weights") {
  LstmLayer<double> layer{Matrix<double>::Zero(8, 4), Vector<double>::Zero(8)};
  const Vector<double> h = Vector<double>::Zero(2), c = Vector<double>::Constant(2, 0.6), x = Vector<double>::Ones(2);
  const auto k = lstm_step(h, c, x, layer);
  CHECK(k.i.isApproxToConstant(0.5));
  CHECK(k.f.isApproxToConstant(0.5));
  CHECK(k.o.isApproxToConstant(0.5));
  CHECK(k.g.isZero());
  CHECK(k.c.isApproxToConstant(0.3));
  CHECK(k.h(0) == doctest::Approx(0.5 * std::tanh(0.3)));
}

TEST_CASE("saturated forget gate keeps the cell") {
  LstmLayer<double> layer{Matrix<double>::Zero(8, 4), Vector<double>::Zero(8)};
  layer.b.segment(0, 2).setConstant(-50);
  layer.b.segment(2, 2).setConstant(50);
  const Vector<double> c = (Vector<double>(2) << 0.7, -1.2).finished();
  const auto k = lstm_step<double>(Vector<double>::Zero(2), c, Vector<double>::Random(2), layer);
  CHECK((k.c - c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("lstm_step rejects mismatched shapes") {
  LstmLayer<double> layer{Matrix<double>::Zero(8, 4), Vector<double>::Zero(8)};
  CHECK_THROWS_AS(lstm_step<double>(Vector<double>::Zero(2), Vector<double>::Zero(2), Vector<double>::Zero(3), layer),
                  UsageError);
}

TEST_CASE("attention weights") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Matrix<double> memory(4, 9), W(4, 4);
  Vector<double> h(4), v(4);
  for (auto& x : memory.reshaped()) x = normal(rng);
  for (auto& x : W.reshaped()) x = normal(rng);
  for (auto& x : h) x = normal(rng);
  for (auto& x : v) x = normal(rng);
  const auto a = attend(h, memory, W, v, 2);
  CHECK(a.weights.sum() == doctest::Approx(1.0));
  CHECK((a.weights.array() >= 0).all());
  CHECK(a.weights.size() <= 5);
  CHECK(a.position <= 8);

  const auto one = attend<double>(h, memory.leftCols(1), W, v, 2);
  REQUIRE(one.weights.size() == 1);
  CHECK(one.weights(0) == doctest::Approx(1.0));
  CHECK((one.context - memory.col(0)).cwiseAbs().maxCoeff() < 1e-15);

  const Matrix<double> same = memory.col(3).replicate(1, 7);
  const auto flat = attend<double>(h, same, W, v, 3);
  CHECK((flat.context - memory.col(3)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(attend<double>(h, Matrix<double>(4, 0), W, v, 2), UsageError);
}

TEST_CASE("zero classifier gives uniform output") {
  Fixture fx;
  fx.params.out_W.setZero();
  fx.params.out_b.setZero();
  const auto probs = predict(fx.batch[0], fx.params, fx.cfg);
  CHECK(probs.isApproxToConstant(1.0 / 3));
  const double loss = loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, nullptr);
  CHECK(loss == doctest::Approx(std::log(3.0)));
}

TEST_CASE("duplicating the batch leaves loss and gradients unchanged") {
  Fixture fx(true, 0.0);
  auto doubled = fx.batch;
  doubled.insert(doubled.end(), fx.batch.begin(), fx.batch.end());
  ModelParams<double> g1, g2;
  const double l1 = loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, &g1);
  const double l2 = loss_and_gradients<double>(doubled, fx.params, fx.cfg, &g2);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  CHECK(max_diff(g1, g2) < 1e-12);
}

TEST_CASE("dropout off matches evaluation mode") {
  Fixture fx(true, 0.0);
  BatchOptions train;
  train.train = true;
  train.dropout_seed = 9;
  const double a = loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, nullptr, train);
  const double b = loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, nullptr);
  CHECK(a == b);

  Fixture noisy(true, 0.5);
  const double c = loss_and_gradients<double>(noisy.batch, noisy.params, noisy.cfg, nullptr, train);
  const double d = loss_and_gradients<double>(noisy.batch, noisy.params, noisy.cfg, nullptr, train);
  const double e = loss_and_gradients<double>(noisy.batch, noisy.params, noisy.cfg, nullptr);
  CHECK(c == d);
  CHECK(c != e);
}

TEST_CASE("renaming the vocabulary does not change predictions") {
  Fixture fx;
  std::vector<int> perm(10);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  auto moved = fx.params;
  for (int i = 0; i < 10; ++i) {
    moved.enc_embed.row(perm[i]) = fx.params.enc_embed.row(i);
    moved.dec_embed.row(perm[i]) = fx.params.dec_embed.row(i);
  }
  for (const auto& ex : fx.batch) {
    EncodedExample renamed = ex;
    for (auto& t : renamed.premise) t = perm[t];
    for (auto& t : renamed.hypothesis) t = perm[t];
    CHECK((predict(ex, fx.params, fx.cfg) - predict(renamed, moved, fx.cfg)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("thread count does not change the result") {
  Fixture fx;
  BatchOptions opts;
  opts.train = true;
  opts.dropout_seed = 4;
  ModelParams<double> g1, g2;
  const double l1 = loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, &g1, opts);
  opts.threads = 2;
  const double l2 = loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, &g2, opts);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-14));
  CHECK(max_diff(g1, g2) < 1e-14);
}

TEST_CASE("frozen embeddings get zero gradient") {
  Fixture fx;
  BatchOptions opts;
  opts.embeddings_trainable = false;
  ModelParams<double> g;
  loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, &g, opts);
  CHECK(g.enc_embed.isZero());
  CHECK(g.dec_embed.isZero());
  CHECK(!g.out_W.isZero());
}

TEST_CASE("gradient matches finite differences without attention") {
  Fixture fx(false, 0.3);
  BatchOptions opts;
  opts.train = true;
  opts.dropout_seed = 11;
  ModelParams<double> g;
  loss_and_gradients<double>(fx.batch, fx.params, fx.cfg, &g, opts);
  auto probe = fx.params;
  double worst = 0;
  const double h = 1e-5;
  visit_tensors(
      true,
      [&](const std::string&, auto& t, const auto& gt) {
        for (Eigen::Index k = 0; k < t.size(); k += 3) {
          const double orig = t.data()[k];
          t.data()[k] = orig + h;
          const double up = loss_and_gradients<double>(fx.batch, probe, fx.cfg, nullptr, opts);
          t.data()[k] = orig - h;
          const double down = loss_and_gradients<double>(fx.batch, probe, fx.cfg, nullptr, opts);
          t.data()[k] = orig;
          const double num = (up - down) / (2 * h);
          worst = std::max(worst, std::abs(num - gt.data()[k]) / std::max({std::abs(num), std::abs(gt.data()[k]), 1e-6}));
        }
      },
      probe, g);
  CHECK(worst < 1e-4);
}

TEST_CASE("init_params shapes") {
  Fixture fx;
  CHECK(fx.params.encoder.size() == 2);
  CHECK(fx.params.encoder[0].W.rows() == 24);
  CHECK(fx.params.encoder[0].W.cols() == 12);
  CHECK(fx.params.combine_W.cols() == 12);
  CHECK(fx.params.out_W.rows() == 3);
  CHECK(params_finite(fx.params));
  ModelConfig bad = fx.cfg;
  bad.d = 5;
  CHECK_THROWS_AS(init_params<double>(bad, fx.E, fx.E, InitSpec{}), UsageError);
}
