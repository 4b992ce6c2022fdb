#include "embnli/synthetic.hpp"
#include "embnli/trainer.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>

using namespace embnli;

namespace {

struct Quiet {
  WarningHandler previous = set_warning_handler([](const std::string&) {});
  ~Quiet() { set_warning_handler(previous); }
};

struct Small {
  SeparableTask task = separable_word_pairs(60, 20, 8, 12, 0.3, 2);
  std::vector<std::string> labels = collect_labels(task.train);
  ModelSetup setup;
  TrainConfig cfg;
  Model<double> model;
  std::vector<EncodedExample> train, dev;

  Small() {
    setup.layers = 1;
    setup.window_D = 2;
    cfg.max_epochs = 3;
    cfg.batch_size = 8;
    cfg.early_stop_patience = 0;
    model = build_model(task.train, labels, EmbeddingFamily{"plain", task.embeddings}, setup, cfg);
    const Vocabulary vocab(model.vocab);
    train = encode_pairs(task.train, vocab, labels);
    dev = encode_pairs(task.dev, vocab, labels);
  }
};

}  // namespace

TEST_CASE("gradient clipping") {
  ModelParams<double> g;
  g.out_W = Matrix<double>::Zero(2, 2);
  g.out_b = (Vector<double>(2) << 0, 0).finished();
  g.out_W(0, 0) = 6;
  CHECK(clip_gradients(g, 3.0) == doctest::Approx(6));
  CHECK(g.out_W(0, 0) == doctest::Approx(3));

  g.out_W(0, 0) = 1.5;
  CHECK(clip_gradients(g, 3.0) == doctest::Approx(1.5));
  CHECK(g.out_W(0, 0) == 1.5);

  g.out_W.setZero();
  CHECK(clip_gradients(g, 3.0) == 0);
  CHECK(g.out_W.isZero());
  CHECK_THROWS_AS(clip_gradients(g, 0.0), UsageError);

  g.enc_embed = Matrix<double>::Constant(1, 1, 100);
  CHECK(clip_gradients(g, 3.0, false) == 0);
  CHECK(g.enc_embed(0, 0) == 100);
}

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  CHECK(cfg.effective_lr(1) == 1.0);
  CHECK(cfg.effective_lr(5) == 1.0);
  CHECK(cfg.effective_lr(6) == 0.8);
  CHECK(cfg.effective_lr(7) == 0.64);
  CHECK(!cfg.embeddings_trainable(4));
  CHECK(cfg.embeddings_trainable(5));
  cfg.lr_decay_rate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("presets and recipes") {
  const auto& p = find_preset("retro-glove/orthogonal");
  CHECK(p.learning_rate == 0.80);
  CHECK(p.kappa == 1.35);
  const auto cfg = apply_preset(TrainConfig{}, p);
  CHECK(cfg.init_scheme == InitScheme::orthogonal);
  CHECK(hyper_presets().size() == 10);
  CHECK_THROWS_AS(find_preset("glove/uniform"), UsageError);
  CHECK(parse_recipe("snli-smoke") == Recipe::snli_smoke);
  CHECK(to_string(Recipe::negation) == "negation");

  CHECK(with_family_schedule(TrainConfig{}, EmbeddingFamily{"random", {}}).embedding_unfreeze_epoch <= 1);
  CHECK(with_family_schedule(TrainConfig{}, EmbeddingFamily{"glove", EmbeddingMatrix<double>{}}).embedding_unfreeze_epoch ==
        5);
}

TEST_CASE("split sizes") {
  std::vector<LabeledPair> pairs(1000);
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = {{"w" + std::to_string(i)}, {"x"}, "a"};
  const auto s = split_80_10_10(pairs, 3);
  CHECK(s.train.size() == 800);
  CHECK(s.dev.size() == 100);
  CHECK(s.test.size() == 100);
  CHECK(split_80_10_10(pairs, 3).dev[0].premise == s.dev[0].premise);
}

TEST_CASE("evaluate counts argmax hits") {
  Small s;
  s.model.params.out_W.setZero();
  s.model.params.out_b.setZero();
  s.model.params.out_b(1) = 1;
  std::vector<EncodedExample> data(s.dev.begin(), s.dev.begin() + 10);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].label = i < 4 ? 1 : 0;
  CHECK(evaluate(s.model, std::span<const EncodedExample>(data)) == doctest::Approx(0.4));
}

TEST_CASE("repeated batch descends") {
  Small s;
  std::vector<EncodedExample> batch(s.train.begin(), s.train.begin() + 8);
  ModelParams<double> g;
  const double first = loss_and_gradients<double>(batch, s.model.params, s.model.config, &g);
  double loss = first;
  for (int step = 0; step < 20; ++step) {
    loss_and_gradients<double>(batch, s.model.params, s.model.config, &g);
    axpy(-1e-2, g, s.model.params);
    loss = loss_and_gradients<double>(batch, s.model.params, s.model.config, nullptr);
  }
  CHECK(loss < first);
}

TEST_CASE("embeddings stay frozen until the unfreeze epoch") {
  Small s;
  s.cfg.embedding_unfreeze_epoch = 3;
  s.cfg.max_epochs = 2;
  const auto before = s.model.params.enc_embed;
  auto result = train<double>(s.model, s.train, s.dev, s.cfg);
  CHECK(result.model.params.enc_embed == before);
  CHECK(result.model.params.out_W != s.model.params.out_W);
  CHECK(!result.log.epochs[0].embeddings_trainable);

  s.cfg.max_epochs = 3;
  result = train<double>(s.model, s.train, s.dev, s.cfg);
  CHECK(result.model.params.enc_embed != before);
  CHECK(result.log.epochs[2].embeddings_trainable);
}

TEST_CASE("training is reproducible and logs each epoch") {
  Small s;
  std::vector<int> seen;
  const auto a = train<double>(s.model, s.train, s.dev, s.cfg, [&](const EpochRecord& r) { seen.push_back(r.epoch); });
  const auto b = train<double>(s.model, s.train, s.dev, s.cfg);
  CHECK(seen == std::vector<int>{1, 2, 3});
  CHECK(a.model.params.out_W == b.model.params.out_W);
  CHECK(a.log.epochs.back().train_loss == b.log.epochs.back().train_loss);
  for (const auto& r : a.log.epochs) CHECK(r.max_clipped_norm <= s.cfg.clip_norm + 1e-9);
  const auto lines = to_json_lines(a.log);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 3);
  CHECK(nlohmann::json::parse(lines.substr(0, lines.find('\n')))["epoch"] == 1);
}

TEST_CASE("early stopping") {
  Small s;
  s.cfg.learning_rate = 1e-9;
  s.cfg.max_epochs = 10;
  s.cfg.early_stop_patience = 2;
  const auto r = train<double>(s.model, s.train, s.dev, s.cfg);
  CHECK(r.log.epochs.size() == 3);
}

TEST_CASE("divergence keeps the last good model") {
  Small s;
  s.cfg.learning_rate = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(s.cfg.validate(), UsageError);
  s.cfg.learning_rate = 1.0;
  s.model.params.out_b(0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train<double>(s.model, s.train, s.dev, s.cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged<double>& e) {
    CHECK(e.log.epochs.empty());
  }
}

TEST_CASE("single precision training runs") {
  Small s;
  const auto r = train<float>(s.model.cast<float>(), s.train, s.dev, s.cfg);
  CHECK(r.log.epochs.size() == 3);
}

TEST_CASE("wordpair report is reproducible") {
  Quiet quiet;
  const auto task = separable_word_pairs(60, 20, 8, 12, 0.3, 4);
  auto pairs = task.train;
  pairs.insert(pairs.end(), task.dev.begin(), task.dev.end());
  ExperimentConfig cfg;
  cfg.train.max_epochs = 2;
  cfg.train.batch_size = 16;
  cfg.setup.layers = 1;
  cfg.setup.random_dim = 8;
  const std::vector<EmbeddingFamily> families{{"plain", task.embeddings}, {"random", {}}};
  const auto a = run_wordpair(pairs, families, cfg);
  const auto b = run_wordpair(pairs, families, cfg);
  CHECK(a.to_json() == b.to_json());
  REQUIRE(a.families.size() == 2);
  CHECK(a.families[1].family == "random");
  CHECK(a.families[0].accuracy.count("test") == 1);
  CHECK(a.sizes.at("train") == 64);
}
