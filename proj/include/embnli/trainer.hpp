#ifndef EMBNLI_TRAINER_HPP
#define EMBNLI_TRAINER_HPP

#include "embnli/checkpoint.hpp"
#include "embnli/dataset.hpp"
#include "embnli/embedding.hpp"
#include "embnli/init.hpp"
#include "embnli/seq2seq.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace embnli {

struct TrainConfig {
  double learning_rate = 1.0;
  double kappa = 1.0;
  InitScheme init_scheme = InitScheme::gaussian;
  bool ortho_depth_correction = false;
  int batch_size = 32;
  double clip_norm = 3.0;
  int lr_decay_start_epoch = 5;
  double lr_decay_rate = 0.8;
  /// First (1-based) epoch in which embedding matrices are updated; 0 or 1
  /// trains them from the start.
  int embedding_unfreeze_epoch = 5;
  int max_epochs = 10;
  /// Stop after this many epochs without a dev improvement; 0 disables.
  int early_stop_patience = 5;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Where to keep the last good parameters, refreshed each epoch.
  std::optional<std::filesystem::path> checkpoint_path;

  void validate() const;

  /// learning_rate * lr_decay_rate^max(0, epoch - lr_decay_start_epoch),
  /// rounded to 15 significant digits so decimal settings give the decimal
  /// result (1.0 and 0.8 at epoch 7 give 0.64, not 0.6400000000000001).
  [[nodiscard]] double effective_lr(int epoch) const;
  [[nodiscard]] bool embeddings_trainable(int epoch) const { return epoch >= embedding_unfreeze_epoch; }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double dev_accuracy = 0;
  double learning_rate = 0;
  bool embeddings_trainable = false;
  double wall_seconds = 0;
  double max_raw_norm = 0;      ///< largest global gradient norm before clipping
  double max_clipped_norm = 0;  ///< largest global gradient norm after clipping
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  [[nodiscard]] double best_dev_accuracy() const;
};

/// One JSON object per epoch.
std::string to_json_lines(const TrainLog& log);

/// Rescales every tensor by clip_norm / g when the global L2 norm g exceeds
/// clip_norm. Returns g.
template <typename Scalar>
double clip_gradients(ModelParams<Scalar>& grads, double clip_norm, bool include_embeddings = true) {
  if (!(clip_norm > 0)) throw UsageError("clip norm must be positive");
  const double norm = std::sqrt(static_cast<double>(squared_norm(grads, include_embeddings)));
  if (!std::isfinite(norm)) throw NumericalError("non-finite gradient norm");
  if (norm > clip_norm) {
    const auto s = static_cast<Scalar>(clip_norm / norm);
    visit_tensors(include_embeddings, [&](const std::string&, auto& t) { t *= s; }, grads);
  }
  return norm;
}

/// Fraction of examples whose argmax label (lowest index on ties) is gold.
template <typename Scalar>
double evaluate(const Model<Scalar>& model, std::span<const EncodedExample> data) {
  if (data.empty()) throw UsageError("evaluate: empty dataset");
  std::size_t correct = 0;
  for (const auto& ex : data)
    if (argmax_label(predict(ex, model.params, model.config)) == ex.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Thrown when the loss goes non-finite; holds the parameters from the end of
/// the last completed epoch.
template <typename Scalar>
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, Model<Scalar> last_good, TrainLog log)
      : NumericalError(what), last_good(std::move(last_good)), log(std::move(log)) {}
  Model<Scalar> last_good;
  TrainLog log;
};

template <typename Scalar>
struct TrainResult {
  Model<Scalar> model;
  TrainLog log;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD: seeded shuffle per epoch; per batch forward, backward,
/// global-norm clipping and an update with the epoch's learning rate.
/// Embedding matrices get neither gradients nor updates before
/// cfg.embedding_unfreeze_epoch.
template <typename Scalar>
TrainResult<Scalar> train(Model<Scalar> model, std::span<const EncodedExample> train_set,
                          std::span<const EncodedExample> dev_set, const TrainConfig& cfg,
                          const EpochObserver& on_epoch = {}) {
  cfg.validate();
  model.config.validate();
  if (train_set.empty() || dev_set.empty()) throw UsageError("train: datasets must be nonempty");
  for (const auto* set : {&train_set, &dev_set})
    for (const auto& ex : *set)
      if (ex.label < 0 || ex.label >= model.config.num_labels)
        throw DataError("example label outside the model's label set");

  TrainLog log;
  Model<Scalar> last_good = model;
  double best_dev = -1;
  int since_best = 0;
  std::vector<std::size_t> order(train_set.size());
  ModelParams<Scalar> grads;
  std::vector<EncodedExample> batch;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = cfg.effective_lr(epoch);
    rec.embeddings_trainable = cfg.embeddings_trainable(epoch);
    const auto lr = static_cast<Scalar>(rec.learning_rate);

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    std::size_t n_batches = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const auto stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        batch.clear();
        for (auto i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
        BatchOptions opts;
        opts.train = true;
        opts.dropout_seed = derive_seed(derive_seed(cfg.seed, 1000003ULL + static_cast<std::uint64_t>(epoch)), n_batches);
        opts.embeddings_trainable = rec.embeddings_trainable;
        opts.threads = cfg.threads;
        const Scalar loss = loss_and_gradients<Scalar>(batch, model.params, model.config, &grads, opts);
        rec.max_raw_norm = std::max(rec.max_raw_norm, clip_gradients(grads, cfg.clip_norm, rec.embeddings_trainable));
        rec.max_clipped_norm =
            std::max(rec.max_clipped_norm, std::sqrt(static_cast<double>(squared_norm(grads, rec.embeddings_trainable))));
        axpy(-lr, grads, model.params, rec.embeddings_trainable);
        loss_sum += static_cast<double>(loss);
        ++n_batches;
      }
      if (!params_finite(model.params)) throw NumericalError("parameters became non-finite");
    } catch (const NumericalError& e) {
      throw TrainingDiverged<Scalar>("training diverged in epoch " + std::to_string(epoch) + ": " + e.what(),
                                     std::move(last_good), std::move(log));
    }
    rec.train_loss = loss_sum / static_cast<double>(n_batches);
    rec.dev_accuracy = evaluate(model, dev_set);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(rec);
    last_good = model;
    if (cfg.checkpoint_path) save_checkpoint(*cfg.checkpoint_path, model.template cast<double>());
    if (on_epoch) on_epoch(rec);

    if (rec.dev_accuracy > best_dev) {
      best_dev = rec.dev_accuracy;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  return {std::move(model), std::move(log)};
}

// ---------------------------------------------------------------------------
// Embedding families and model assembly

/// A named source of input vectors. Without vectors the family is "random":
/// N(0, 1) rows drawn per run and trained from the first epoch.
struct EmbeddingFamily {
  std::string name;
  std::optional<EmbeddingMatrix<double>> vectors;
  [[nodiscard]] bool pretrained() const { return vectors.has_value(); }
};

enum class PreprocessScope {
  task,  ///< statistics over the task vocabulary (rows actually used)
  full,  ///< statistics over the whole source matrix
};

struct ModelSetup {
  int layers = 2;
  double dropout_p = 0.2;
  bool attention = true;
  int window_D = 5;
  bool preprocess = true;
  PreprocessScope scope = PreprocessScope::task;
  /// Dimension for the random family (pretrained families use their own).
  int random_dim = 300;
};

/// Task vocabulary from `train`, embeddings from `family` (shared initial
/// values for encoder and decoder), weights initialized per `cfg`.
Model<double> build_model(const std::vector<LabeledPair>& train, const std::vector<std::string>& labels,
                          const EmbeddingFamily& family, const ModelSetup& setup, const TrainConfig& cfg);

/// Unfreeze at epoch 5 for pretrained families, from the start for random.
TrainConfig with_family_schedule(TrainConfig cfg, const EmbeddingFamily& family);

/// Optimal (learning rate, init range) pairs from the SNLI search, by
/// "<family>/<scheme>", e.g. "retro-glove/orthogonal".
struct HyperPreset {
  std::string name;
  std::string family;
  InitScheme scheme;
  double learning_rate;
  double kappa;
};
const std::vector<HyperPreset>& hyper_presets();
const HyperPreset& find_preset(const std::string& name);
TrainConfig apply_preset(TrainConfig cfg, const HyperPreset& preset);

// ---------------------------------------------------------------------------
// Experiment recipes

enum class Recipe { wordpair, negation, snli_smoke };
Recipe parse_recipe(std::string_view name);
std::string_view to_string(Recipe r);

struct ExperimentConfig {
  TrainConfig train;
  ModelSetup setup;
  bool family_schedule = true;  ///< apply with_family_schedule per family
  std::size_t subsample = 2000; ///< snli_smoke: training examples kept
  bool single_precision = false;
};

struct FamilyResult {
  std::string family;
  double best_dev = 0;
  int epochs_run = 0;
  std::map<std::string, double> accuracy;  ///< split name -> accuracy
};

struct ExperimentReport {
  Recipe recipe = Recipe::wordpair;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> sizes;
  std::vector<FamilyResult> families;
  [[nodiscard]] std::string to_json() const;
};

/// Seeded 80/10/10 split; per family train then score the test split.
ExperimentReport run_wordpair(const std::vector<LabeledPair>& pairs, const std::vector<EmbeddingFamily>& families,
                              const ExperimentConfig& cfg);

/// Trains on `train` (10% held out as dev) and scores each depth's test set.
ExperimentReport run_negation(const std::vector<LabeledPair>& train, const std::map<int, std::vector<LabeledPair>>& tests,
                              const std::vector<EmbeddingFamily>& families, const ExperimentConfig& cfg);

/// One epoch on a subsample of `train`, scored on `dev`.
ExperimentReport run_snli_smoke(const std::vector<LabeledPair>& train, const std::vector<LabeledPair>& dev,
                                const std::vector<EmbeddingFamily>& families, const ExperimentConfig& cfg);

struct ExperimentPaths {
  std::filesystem::path data;   ///< wordpair
  std::filesystem::path train;  ///< negation, snli_smoke
  std::filesystem::path dev;    ///< snli_smoke
  std::map<int, std::filesystem::path> tests;  ///< negation: depth -> TSV
  /// family name -> embedding text file; the name "random" needs no file.
  std::vector<std::pair<std::string, std::filesystem::path>> families;
};

ExperimentReport run_experiment(Recipe recipe, const ExperimentPaths& paths, const ExperimentConfig& cfg);

}  // namespace embnli

#endif  // EMBNLI_TRAINER_HPP
