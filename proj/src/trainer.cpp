#include "embnli/trainer.hpp"

#include <json.hpp>

#include <algorithm>

namespace embnli {

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw UsageError("learning rate must be positive");
  if (!(kappa > 0) || !std::isfinite(kappa)) throw UsageError("kappa must be positive");
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  if (!(clip_norm > 0)) throw UsageError("clip norm must be positive");
  if (!(lr_decay_rate > 0 && lr_decay_rate <= 1)) throw UsageError("lr decay rate must lie in (0, 1]");
  if (max_epochs < 1) throw UsageError("max epochs must be at least 1");
  if (early_stop_patience < 0) throw UsageError("early stop patience must be non-negative");
  if (threads < 1) throw UsageError("threads must be at least 1");
}

double TrainConfig::effective_lr(int epoch) const {
  const double raw = learning_rate * std::pow(lr_decay_rate, std::max(0, epoch - lr_decay_start_epoch));
  double rounded = raw;
  if (!parse_double(format_double(raw, 15), rounded)) return raw;
  return rounded;
}

double TrainLog::best_dev_accuracy() const {
  double best = 0;
  for (const auto& e : epochs) best = std::max(best, e.dev_accuracy);
  return best;
}

std::string to_json_lines(const TrainLog& log) {
  std::string out;
  for (const auto& e : log.epochs) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"dev_accuracy", e.dev_accuracy},
                     {"learning_rate", e.learning_rate},
                     {"embeddings_trainable", e.embeddings_trainable},
                     {"max_raw_norm", e.max_raw_norm},
                     {"max_clipped_norm", e.max_clipped_norm},
                     {"wall_seconds", e.wall_seconds}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

Model<double> build_model(const std::vector<LabeledPair>& train, const std::vector<std::string>& labels,
                          const EmbeddingFamily& family, const ModelSetup& setup, const TrainConfig& cfg) {
  cfg.validate();
  if (labels.empty()) throw UsageError("build_model: no labels");
  const auto tokens = collect_tokens(train);
  EmbeddingMatrix<double> emb;
  if (family.pretrained()) {
    std::size_t missing = 0;
    if (setup.preprocess && setup.scope == PreprocessScope::full) {
      emb = task_embeddings(preprocess(*family.vectors), std::span<const std::string>(tokens),
                            derive_seed(cfg.seed, 11), &missing);
    } else {
      emb = task_embeddings(*family.vectors, std::span<const std::string>(tokens), derive_seed(cfg.seed, 11), &missing);
      if (setup.preprocess) emb = preprocess(emb);
    }
    if (missing > 0)
      warn(family.name + ": " + std::to_string(missing) + " task token(s) without a vector map to " + kUnknownToken);
  } else {
    std::vector<std::string> vocab{kUnknownToken};
    for (const auto& t : tokens)
      if (t != kUnknownToken) vocab.push_back(t);
    emb = random_embeddings<double>(std::move(vocab), setup.random_dim, 1.0, derive_seed(cfg.seed, 13));
  }

  Model<double> model;
  model.config.d = static_cast<int>(emb.dim());
  model.config.layers = setup.layers;
  model.config.num_labels = static_cast<int>(labels.size());
  model.config.dropout_p = setup.dropout_p;
  model.config.attention = setup.attention;
  model.config.window_D = setup.window_D;
  model.vocab = emb.vocab();
  model.labels = labels;

  InitSpec spec;
  spec.scheme = cfg.init_scheme;
  spec.kappa = cfg.kappa;
  spec.num_layers = setup.layers;
  spec.seed = derive_seed(cfg.seed, 17);
  spec.ortho_depth_correction = cfg.ortho_depth_correction;
  model.params = init_params<double>(model.config, emb.vectors(), emb.vectors(), spec);
  return model;
}

TrainConfig with_family_schedule(TrainConfig cfg, const EmbeddingFamily& family) {
  cfg.embedding_unfreeze_epoch = family.pretrained() ? 5 : 0;
  return cfg;
}

const std::vector<HyperPreset>& hyper_presets() {
  static const std::vector<HyperPreset> presets = [] {
    std::vector<HyperPreset> v;
    auto add = [&](const char* family, double g_lr, double g_k, double o_lr, double o_k) {
      v.push_back({std::string(family) + "/gaussian", family, InitScheme::gaussian, g_lr, g_k});
      v.push_back({std::string(family) + "/orthogonal", family, InitScheme::orthogonal, o_lr, o_k});
    };
    add("random", 1.31, 1.86, 0.99, 0.34);
    add("glove", 1.12, 1.42, 0.85, 0.23);
    add("word2vec", 1.16, 0.44, 0.98, 2.06);
    add("retro-glove", 1.57, 1.91, 0.80, 1.35);
    add("retro-word2vec", 0.64, 2.43, 0.44, 2.45);
    return v;
  }();
  return presets;
}

const HyperPreset& find_preset(const std::string& name) {
  for (const auto& p : hyper_presets())
    if (p.name == name) return p;
  throw UsageError("unknown preset '" + name + "'");
}

TrainConfig apply_preset(TrainConfig cfg, const HyperPreset& preset) {
  cfg.learning_rate = preset.learning_rate;
  cfg.kappa = preset.kappa;
  cfg.init_scheme = preset.scheme;
  return cfg;
}

Recipe parse_recipe(std::string_view name) {
  if (name == "wordpair") return Recipe::wordpair;
  if (name == "negation") return Recipe::negation;
  if (name == "snli_smoke" || name == "snli-smoke") return Recipe::snli_smoke;
  throw UsageError("unknown recipe '" + std::string(name) + "'");
}

std::string_view to_string(Recipe r) {
  switch (r) {
    case Recipe::wordpair: return "wordpair";
    case Recipe::negation: return "negation";
    case Recipe::snli_smoke: return "snli_smoke";
  }
  return "?";
}

std::string ExperimentReport::to_json() const {
  nlohmann::json j;
  j["recipe"] = std::string(to_string(recipe));
  j["seed"] = seed;
  j["sizes"] = sizes;
  auto& fams = j["families"] = nlohmann::json::array();
  for (const auto& f : families)
    fams.push_back({{"family", f.family}, {"best_dev", f.best_dev}, {"epochs_run", f.epochs_run}, {"accuracy", f.accuracy}});
  return j.dump(2);
}

namespace {

struct Trained {
  Model<double> model;
  TrainLog log;
};

Trained fit(const std::vector<LabeledPair>& train_pairs, const std::vector<LabeledPair>& dev_pairs,
            const std::vector<std::string>& labels, const EmbeddingFamily& family, const ExperimentConfig& cfg) {
  const TrainConfig tc = cfg.family_schedule ? with_family_schedule(cfg.train, family) : cfg.train;
  auto model = build_model(train_pairs, labels, family, cfg.setup, tc);
  const Vocabulary vocab(model.vocab);
  const auto train_set = encode_pairs(train_pairs, vocab, labels);
  const auto dev_set = encode_pairs(dev_pairs, vocab, labels);
  if (cfg.single_precision) {
    auto r = train<float>(model.cast<float>(), train_set, dev_set, tc);
    return {r.model.cast<double>(), std::move(r.log)};
  }
  auto r = train<double>(std::move(model), train_set, dev_set, tc);
  return {std::move(r.model), std::move(r.log)};
}

double score(const Model<double>& model, const std::vector<LabeledPair>& pairs) {
  const Vocabulary vocab(model.vocab);
  return evaluate(model, std::span<const EncodedExample>(encode_pairs(pairs, vocab, model.labels)));
}

FamilyResult summarize(const std::string& name, const Trained& t) {
  FamilyResult r;
  r.family = name;
  r.best_dev = t.log.best_dev_accuracy();
  r.epochs_run = static_cast<int>(t.log.epochs.size());
  return r;
}

}  // namespace

ExperimentReport run_wordpair(const std::vector<LabeledPair>& pairs, const std::vector<EmbeddingFamily>& families,
                              const ExperimentConfig& cfg) {
  const auto split = split_80_10_10(pairs, cfg.train.seed);
  if (split.dev.empty() || split.test.empty()) throw DataError("word-pair data too small to split");
  const auto labels = collect_labels(pairs);
  ExperimentReport rep;
  rep.recipe = Recipe::wordpair;
  rep.seed = cfg.train.seed;
  rep.sizes = {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}};
  for (const auto& fam : families) {
    const auto t = fit(split.train, split.dev, labels, fam, cfg);
    auto r = summarize(fam.name, t);
    r.accuracy["dev"] = score(t.model, split.dev);
    r.accuracy["test"] = score(t.model, split.test);
    rep.families.push_back(std::move(r));
  }
  return rep;
}

ExperimentReport run_negation(const std::vector<LabeledPair>& train_pairs,
                              const std::map<int, std::vector<LabeledPair>>& tests,
                              const std::vector<EmbeddingFamily>& families, const ExperimentConfig& cfg) {
  std::vector<LabeledPair> shuffled = train_pairs;
  std::mt19937_64 rng(derive_seed(cfg.train.seed, 19));
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_dev = std::max<std::size_t>(1, shuffled.size() / 10);
  if (shuffled.size() <= n_dev) throw DataError("negation training data too small");
  const std::vector<LabeledPair> dev(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_dev));
  const std::vector<LabeledPair> train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_dev), shuffled.end());

  auto all = train_pairs;
  for (const auto& [depth, set] : tests) all.insert(all.end(), set.begin(), set.end());
  const auto labels = collect_labels(all);

  ExperimentReport rep;
  rep.recipe = Recipe::negation;
  rep.seed = cfg.train.seed;
  rep.sizes = {{"train", train.size()}, {"dev", dev.size()}};
  for (const auto& [depth, set] : tests) rep.sizes["depth" + std::to_string(depth)] = set.size();
  for (const auto& fam : families) {
    const auto t = fit(train, dev, labels, fam, cfg);
    auto r = summarize(fam.name, t);
    for (const auto& [depth, set] : tests)
      if (!set.empty()) r.accuracy["depth" + std::to_string(depth)] = score(t.model, set);
    rep.families.push_back(std::move(r));
  }
  return rep;
}

ExperimentReport run_snli_smoke(const std::vector<LabeledPair>& train_pairs, const std::vector<LabeledPair>& dev,
                                const std::vector<EmbeddingFamily>& families, const ExperimentConfig& cfg) {
  if (train_pairs.empty() || dev.empty()) throw DataError("smoke run needs train and dev data");
  std::vector<LabeledPair> sub = train_pairs;
  std::mt19937_64 rng(derive_seed(cfg.train.seed, 23));
  std::shuffle(sub.begin(), sub.end(), rng);
  if (cfg.subsample > 0 && sub.size() > cfg.subsample) sub.resize(cfg.subsample);

  auto all = sub;
  all.insert(all.end(), dev.begin(), dev.end());
  const auto labels = collect_labels(all);

  ExperimentConfig one = cfg;
  one.train.max_epochs = 1;
  ExperimentReport rep;
  rep.recipe = Recipe::snli_smoke;
  rep.seed = cfg.train.seed;
  rep.sizes = {{"train", sub.size()}, {"dev", dev.size()}};
  for (const auto& fam : families) {
    const auto t = fit(sub, dev, labels, fam, one);
    auto r = summarize(fam.name, t);
    r.accuracy["dev"] = t.log.epochs.back().dev_accuracy;
    rep.families.push_back(std::move(r));
  }
  return rep;
}

ExperimentReport run_experiment(Recipe recipe, const ExperimentPaths& paths, const ExperimentConfig& cfg) {
  std::vector<EmbeddingFamily> families;
  for (const auto& [name, path] : paths.families) {
    EmbeddingFamily f{name, std::nullopt};
    if (!path.empty()) f.vectors = load_embeddings(path);
    families.push_back(std::move(f));
  }
  if (families.empty()) throw UsageError("no embedding families given");
  switch (recipe) {
    case Recipe::wordpair:
      return run_wordpair(read_pairs_tsv(paths.data), families, cfg);
    case Recipe::negation: {
      std::map<int, std::vector<LabeledPair>> tests;
      for (const auto& [depth, path] : paths.tests) tests[depth] = read_pairs_tsv(path);
      return run_negation(read_pairs_tsv(paths.train), tests, families, cfg);
    }
    case Recipe::snli_smoke:
      return run_snli_smoke(read_pairs_tsv(paths.train), read_pairs_tsv(paths.dev), families, cfg);
  }
  throw UsageError("unknown recipe");
}

}  // namespace embnli
