#include "embnli/cli.hpp"

#include "embnli/checkpoint.hpp"
#include "embnli/dataset.hpp"
#include "embnli/embedding.hpp"
#include "embnli/hypersearch.hpp"
#include "embnli/io.hpp"
#include "embnli/negation.hpp"
#include "embnli/retrofit.hpp"
#include "embnli/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace embnli {

std::string RunManifest::to_json() const {
  nlohmann::json j{{"subcommand", subcommand}, {"argv", argv},     {"config", config},
                   {"input_sha256", input_sha256}, {"seed", seed}, {"version", version}};
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.input_sha256 = j.at("input_sha256").get<std::map<std::string, std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return 1;
  return 2;
}

namespace {

/// Relative input paths resolve under $EMBNLI_DATA_ROOT when it is set.
std::filesystem::path input_path(const std::string& p) {
  std::filesystem::path path(p);
  if (const char* root = std::getenv("EMBNLI_DATA_ROOT"); root && *root && path.is_relative())
    return std::filesystem::path(root) / path;
  return path;
}

std::map<std::string, std::string> read_flat_config(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    auto key = std::string(trim(body.substr(0, eq)));
    if (key.empty()) throw UsageError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    std::replace(key.begin(), key.end(), '_', '-');
    out[key] = std::string(trim(body.substr(eq + 1)));
  }
  return out;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& part : split(text, ',')) {
    const auto t = trim(part);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(std::string(t), &used));
      if (used != t.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("expected a comma-separated integer list, got '" + text + "'");
    }
  }
  return out;
}

std::pair<std::string, std::string> split_assignment(const std::string& text, const char* what) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError(std::string(what) + " expects name=path, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

struct Session {
  CLI::App* sub = nullptr;
  std::vector<std::string> args;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string manifest_path;
  std::ostream* out = nullptr;
  std::map<std::string, std::filesystem::path> inputs;

  std::filesystem::path input(const std::string& key, const std::string& value) {
    auto p = input_path(value);
    inputs[key] = p;
    return p;
  }

  void write_manifest(const std::filesystem::path& primary_output) const {
    RunManifest m;
    m.subcommand = sub->get_name();
    m.argv = args;
    m.seed = seed;
    for (const auto* opt : sub->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name().empty()) continue;
      const auto& res = opt->results();
      std::string value;
      if (!res.empty()) {
        for (std::size_t i = 0; i < res.size(); ++i) value += (i ? "," : "") + res[i];
      } else {
        value = opt->get_default_str();
      }
      m.config[opt->get_name()] = value;
    }
    for (const auto& [key, path] : inputs) m.input_sha256[path.string()] = sha256_file(path);
    const std::filesystem::path target = manifest_path.empty()
                                             ? std::filesystem::path(primary_output.string() + ".manifest.json")
                                             : std::filesystem::path(manifest_path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const auto text = m.to_json();
    write_file_atomic(target, [&](std::ostream& o) { o << text; });
  }
};

// ---------------------------------------------------------------------------

struct PreprocessCmd {
  std::string embeddings, out;
  bool no_center = false, no_scale = false;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("preprocess", "Mean-center and rescale an embedding file");
    s->add_option("--embeddings", embeddings, "Input embedding text file")->required();
    s->add_option("--out", out, "Output embedding text file")->required();
    s->add_flag("--no-center", no_center, "Skip mean centering");
    s->add_flag("--no-scale", no_scale, "Skip unit-std rescaling");
  }

  void run(Session& ss) {
    const auto in = ss.input("embeddings", embeddings);
    ss.write_manifest(out);
    auto e = load_embeddings(in);
    if (!no_center) e = mean_center(e);
    if (!no_scale) e = rescale_unit_std(e);
    save_embeddings(std::filesystem::path(out), e);
    *ss.out << "wrote " << e.size() << " x " << e.dim() << " to " << out << "\n";
  }
};

struct RetrofitCmd {
  std::string embeddings, lexicon, out, trace;
  int iters = 10;
  double alpha = 1.0, tol = 1e-6, beta_value = 1.0;
  std::string beta = "inverse-degree";

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("retrofit", "Retrofit embeddings to a lexicon graph");
    s->add_option("--embeddings", embeddings, "Input embedding text file")->required();
    s->add_option("--lexicon", lexicon, "Lexicon file: word neighbor...")->required();
    s->add_option("--out", out, "Output embedding text file")->required();
    s->add_option("--iters", iters, "Maximum sweeps")->check(CLI::PositiveNumber);
    s->add_option("--alpha", alpha, "Weight on the original vector");
    s->add_option("--tol", tol, "Stop when no entry moves more than this");
    s->add_option("--beta", beta, "Neighbor weighting")->check(CLI::IsMember({"inverse-degree", "uniform"}));
    s->add_option("--beta-value", beta_value, "Neighbor weight under --beta uniform");
    s->add_option("--trace", trace, "Write the objective after each sweep here");
  }

  void run(Session& ss) {
    const auto ein = ss.input("embeddings", embeddings);
    const auto lin = ss.input("lexicon", lexicon);
    ss.write_manifest(out);
    const auto e = load_embeddings(ein);
    const auto lex = load_lexicon(lin);
    RetrofitConfig cfg;
    cfg.alpha = alpha;
    cfg.max_iterations = iters;
    cfg.convergence_tol = tol;
    cfg.beta_rule = beta == "uniform" ? BetaRule::uniform : BetaRule::inverse_degree;
    cfg.uniform_beta = beta_value;
    std::vector<double> objective;
    const auto r = retrofit(e, lex, cfg, &objective);
    save_embeddings(std::filesystem::path(out), r);
    if (!trace.empty())
      write_file_atomic(trace, [&](std::ostream& o) {
        for (std::size_t i = 0; i < objective.size(); ++i) o << i << '\t' << format_double(objective[i], 17) << '\n';
      });
    *ss.out << "retrofitted " << r.size() << " vectors in " << (objective.size() - 1) << " sweeps\n";
  }
};

struct GenNegationCmd {
  std::string base, out_dir = "negation", test_depths = "3,4,5,6", conflicts = "drop";
  int train_depth = 2;
  std::size_t downsample = 10000;
  bool cumulative = false;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("gen-negation", "Expand base pairs into negation train and test sets");
    s->add_option("--base", base, "Base pairs TSV: premise, hypothesis, relation")->required();
    s->add_option("--out-dir", out_dir, "Directory for train.tsv and test_l<k>.tsv");
    s->add_option("--train-depth", train_depth, "Deepest negation level in train")->check(CLI::NonNegativeNumber);
    s->add_option("--test-depths", test_depths, "Comma-separated test levels");
    s->add_option("--downsample", downsample, "Examples kept per set, label-stratified; 0 keeps all");
    s->add_option("--conflicts", conflicts, "Surface pairs with several labels")
        ->check(CLI::IsMember({"drop", "abort", "keep-first", "keep_first"}));
    s->add_flag("--cumulative", cumulative, "Test set k holds every level above train up to k");
  }

  void run(Session& ss) {
    const auto in = ss.input("base", base);
    ss.write_manifest(std::filesystem::path(out_dir) / "train.tsv");
    NegationConfig cfg;
    cfg.train_depth = train_depth;
    cfg.test_depths = parse_int_list(test_depths);
    cfg.downsample_to = downsample;
    cfg.seed = ss.seed;
    cfg.cumulative_tests = cumulative;
    cfg.conflicts = parse_conflict_policy(conflicts);
    const auto data = generate_dataset(read_negation_tsv(in), cfg);
    std::filesystem::create_directories(out_dir);
    write_negation_tsv(std::filesystem::path(out_dir) / "train.tsv", data.train);
    nlohmann::json stats;
    auto dump = [](const SplitStats& s, std::size_t kept) {
      return nlohmann::json{{"derivations", s.derivations}, {"distinct_pairs", s.distinct_pairs},
                            {"conflicting_pairs", s.conflicting_pairs}, {"overlap_removed", s.overlap_removed},
                            {"pool", s.pool}, {"kept", kept}};
    };
    stats["train"] = dump(data.train_stats, data.train.size());
    for (const auto& [depth, set] : data.tests) {
      write_negation_tsv(std::filesystem::path(out_dir) / ("test_l" + std::to_string(depth) + ".tsv"), set);
      stats["test_l" + std::to_string(depth)] = dump(data.test_stats.at(depth), set.size());
    }
    const auto text = stats.dump(2) + "\n";
    write_file_atomic(std::filesystem::path(out_dir) / "stats.json", [&](std::ostream& o) { o << text; });
    *ss.out << text;
  }
};

/// Training options shared by train, report and the search evaluator.
struct TrainFlags {
  double lr = 1.0, kappa = 1.0, dropout = 0.2;
  std::string init = "gaussian", preset;
  int epochs = 10, batch = 32, layers = 2, window = 5, random_dim = 300, unfreeze = -1, patience = 5;
  bool no_attention = false, no_preprocess = false, full_scope = false, single = false, ortho_depth = false;

  void add(CLI::App* s) {
    s->add_option("--lr", lr, "Initial learning rate")->check(CLI::PositiveNumber);
    s->add_option("--kappa", kappa, "Initialization scale")->check(CLI::PositiveNumber);
    s->add_option("--init", init, "Weight initialization")
        ->check(CLI::IsMember({"gaussian", "orthogonal", "orthonormal"}));
    s->add_option("--preset", preset, "Named (lr, kappa, init) preset such as glove/orthogonal");
    s->add_option("--epochs", epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    s->add_option("--batch", batch, "Mini-batch size")->check(CLI::PositiveNumber);
    s->add_option("--layers", layers, "LSTM layers")->check(CLI::PositiveNumber);
    s->add_option("--dropout", dropout, "Dropout probability");
    s->add_option("--window", window, "Local attention half-width D")->check(CLI::PositiveNumber);
    s->add_flag("--no-attention", no_attention, "Classify from the decoder state alone");
    s->add_option("--random-dim", random_dim, "Dimension of random embeddings")->check(CLI::PositiveNumber);
    s->add_option("--unfreeze", unfreeze, "First trainable epoch for embeddings; default by family");
    s->add_option("--patience", patience, "Early-stop patience in epochs; 0 disables");
    s->add_flag("--no-preprocess", no_preprocess, "Use pretrained vectors as they are");
    s->add_flag("--full-scope", full_scope, "Preprocessing statistics over the whole embedding file");
    s->add_flag("--float", single, "Train in single precision");
    s->add_flag("--ortho-depth-correction", ortho_depth, "Scale orthogonal blocks by (1/sqrt 2)^L too");
  }

  [[nodiscard]] TrainConfig train_config(const Session& ss) const {
    TrainConfig c;
    c.learning_rate = lr;
    c.kappa = kappa;
    c.init_scheme = parse_init_scheme(init);
    if (!preset.empty()) c = apply_preset(c, find_preset(preset));
    c.batch_size = batch;
    c.max_epochs = epochs;
    c.early_stop_patience = patience;
    c.seed = ss.seed;
    c.threads = ss.threads;
    c.ortho_depth_correction = ortho_depth;
    if (unfreeze >= 0) c.embedding_unfreeze_epoch = unfreeze;
    return c;
  }

  [[nodiscard]] ModelSetup setup() const {
    ModelSetup s;
    s.layers = layers;
    s.dropout_p = dropout;
    s.attention = !no_attention;
    s.window_D = window;
    s.preprocess = !no_preprocess;
    s.scope = full_scope ? PreprocessScope::full : PreprocessScope::task;
    s.random_dim = random_dim;
    return s;
  }
};

struct TrainCmd {
  std::string train, dev, embeddings, family, out = "model.ckpt", log;
  TrainFlags flags;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("train", "Train a classifier on TSV pairs");
    s->add_option("--train", train, "Training pairs TSV")->required();
    s->add_option("--dev", dev, "Development pairs TSV")->required();
    s->add_option("--embeddings", embeddings, "Pretrained embedding file; omit for random");
    s->add_option("--family", family, "Name recorded for the embeddings");
    s->add_option("--out", out, "Checkpoint path, refreshed every epoch");
    s->add_option("--log", log, "Per-epoch log (JSON lines); default <out>.log.jsonl");
    flags.add(s);
  }

  void run(Session& ss) {
    const auto tin = ss.input("train", train);
    const auto din = ss.input("dev", dev);
    EmbeddingFamily fam{family.empty() ? (embeddings.empty() ? "random" : "pretrained") : family, std::nullopt};
    std::filesystem::path ein;
    if (!embeddings.empty()) ein = ss.input("embeddings", embeddings);
    ss.write_manifest(out);
    if (!embeddings.empty()) fam.vectors = load_embeddings(ein);

    const auto train_pairs = read_pairs_tsv(tin);
    const auto dev_pairs = read_pairs_tsv(din);
    auto all = train_pairs;
    all.insert(all.end(), dev_pairs.begin(), dev_pairs.end());
    const auto labels = collect_labels(all);

    TrainConfig cfg = flags.train_config(ss);
    if (flags.unfreeze < 0) cfg = with_family_schedule(cfg, fam);
    cfg.checkpoint_path = std::filesystem::path(out);
    auto model = build_model(train_pairs, labels, fam, flags.setup(), cfg);
    const Vocabulary vocab(model.vocab);
    const auto tr = encode_pairs(train_pairs, vocab, labels);
    const auto dv = encode_pairs(dev_pairs, vocab, labels);
    const std::filesystem::path log_path = log.empty() ? std::filesystem::path(out + ".log.jsonl") : std::filesystem::path(log);

    auto report = [&](const EpochRecord& r) {
      *ss.out << "epoch " << r.epoch << " loss " << format_double(r.train_loss, 6) << " dev "
              << format_double(r.dev_accuracy, 6) << " lr " << format_double(r.learning_rate, 6) << "\n";
    };
    TrainLog final_log;
    try {
      if (flags.single) {
        final_log = embnli::train<float>(model.cast<float>(), tr, dv, cfg, report).log;
      } else {
        final_log = embnli::train<double>(std::move(model), tr, dv, cfg, report).log;
      }
    } catch (const TrainingDiverged<double>& e) {
      const auto text = to_json_lines(e.log);
      write_file_atomic(log_path, [&](std::ostream& o) { o << text; });
      throw;
    } catch (const TrainingDiverged<float>& e) {
      const auto text = to_json_lines(e.log);
      write_file_atomic(log_path, [&](std::ostream& o) { o << text; });
      throw;
    }
    const auto text = to_json_lines(final_log);
    write_file_atomic(log_path, [&](std::ostream& o) { o << text; });
    *ss.out << "best dev accuracy " << format_double(final_log.best_dev_accuracy(), 6) << "\n";
  }
};

struct EvalCmd {
  std::string model, data, out = "eval.json";

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("eval", "Score a checkpoint on TSV pairs");
    s->add_option("--model", model, "Checkpoint")->required();
    s->add_option("--data", data, "Pairs TSV")->required();
    s->add_option("--out", out, "Result JSON");
  }

  void run(Session& ss) {
    const auto min = ss.input("model", model);
    const auto din = ss.input("data", data);
    ss.write_manifest(out);
    const auto m = load_checkpoint(min);
    const auto pairs = read_pairs_tsv(din);
    for (const auto& p : pairs)
      if (std::find(m.labels.begin(), m.labels.end(), p.label) == m.labels.end())
        throw DataError("label '" + p.label + "' is not known to the model");
    const Vocabulary vocab(m.vocab);
    const auto encoded = encode_pairs(pairs, vocab, m.labels);
    const double acc = evaluate(m, std::span<const EncodedExample>(encoded));
    const auto text = nlohmann::json{{"accuracy", acc}, {"examples", pairs.size()}}.dump(2) + "\n";
    write_file_atomic(out, [&](std::ostream& o) { o << text; });
    *ss.out << text;
  }
};

struct ReportCmd {
  std::string recipe = "wordpair", data, train, dev, out = "report.json";
  std::vector<std::string> tests, families;
  std::size_t subsample = 2000;
  TrainFlags flags;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("report", "Run an experiment recipe and write an accuracy report");
    s->add_option("--recipe", recipe, "wordpair, negation or snli_smoke")
        ->check(CLI::IsMember({"wordpair", "negation", "snli_smoke", "snli-smoke"}));
    s->add_option("--data", data, "wordpair: labeled pairs TSV");
    s->add_option("--train", train, "negation, snli_smoke: training TSV");
    s->add_option("--dev", dev, "snli_smoke: dev TSV");
    s->add_option("--test", tests, "negation: depth=path, repeatable");
    s->add_option("--family", families, "name=embedding file, or 'random'; repeatable")->required();
    s->add_option("--subsample", subsample, "snli_smoke: training examples kept");
    s->add_option("--out", out, "Report JSON");
    flags.epochs = 35;
    flags.add(s);
  }

  void run(Session& ss) {
    const auto r = parse_recipe(recipe);
    ExperimentPaths paths;
    auto need = [&](const std::string& v, const char* name) {
      if (v.empty()) throw UsageError(std::string("recipe ") + std::string(to_string(r)) + " needs --" + name);
      return ss.input(name, v);
    };
    switch (r) {
      case Recipe::wordpair: paths.data = need(data, "data"); break;
      case Recipe::negation:
        paths.train = need(train, "train");
        for (const auto& t : tests) {
          const auto [depth, path] = split_assignment(t, "--test");
          const auto d = parse_int_list(depth);
          if (d.size() != 1) throw UsageError("--test depth must be one integer");
          paths.tests[d[0]] = ss.input("test" + depth, path);
        }
        if (paths.tests.empty()) throw UsageError("recipe negation needs at least one --test");
        break;
      case Recipe::snli_smoke:
        paths.train = need(train, "train");
        paths.dev = need(dev, "dev");
        break;
    }
    for (const auto& f : families) {
      if (f == "random") {
        paths.families.emplace_back("random", std::filesystem::path());
        continue;
      }
      const auto [name, path] = split_assignment(f, "--family");
      paths.families.emplace_back(name, ss.input("family:" + name, path));
    }
    ss.write_manifest(out);
    ExperimentConfig cfg;
    cfg.train = flags.train_config(ss);
    cfg.setup = flags.setup();
    cfg.family_schedule = flags.unfreeze < 0;
    cfg.subsample = subsample;
    cfg.single_precision = flags.single;
    const auto text = run_experiment(r, paths, cfg).to_json() + "\n";
    write_file_atomic(out, [&](std::ostream& o) { o << text; });
    *ss.out << text;
  }
};

struct SearchCmd {
  std::string space, out_dir = "search", freeze;
  int anneal_iters = 5, trials = 50, coarse_trials = -1;
  double shrink = 0.9;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("search", "Coarse random search followed by annealed refinement");
    s->add_option("--space", space, "Search space file")->required();
    s->add_option("--anneal-iters", anneal_iters, "Refinement iterations")->check(CLI::NonNegativeNumber);
    s->add_option("--shrink", shrink, "Window shrink factor per iteration");
    s->add_option("--trials", trials, "Trials per refinement iteration")->check(CLI::PositiveNumber);
    s->add_option("--coarse-trials", coarse_trials, "Coarse-stage trials; default --trials");
    s->add_option("--freeze", freeze, "Comma-separated continuous dims pinned during refinement");
    s->add_option("--out-dir", out_dir, "Directory for trials.jsonl and best.json");
  }

  /// objective = quadratic: negative squared distance in scale space to
  /// target.<dim> (default the window center). objective = train: best dev
  /// accuracy of a short run with learning_rate, kappa and init_scheme taken
  /// from the trial; data from the train, dev, embeddings and epochs keys.
  Evaluator make_evaluator(const SearchSpace& sp, const std::map<std::string, std::string>& extra, Session& ss) {
    auto get = [&](const std::string& k, const std::string& fallback) {
      auto it = extra.find(k);
      return it == extra.end() ? fallback : it->second;
    };
    const auto objective = get("objective", "quadratic");
    if (objective == "quadratic") {
      std::map<std::string, double> target;
      for (const auto& d : sp.continuous()) {
        const auto t = get("target." + d.name, "");
        double v = 0;
        if (t.empty()) {
          v = d.from_scale(0.5 * (d.to_scale(d.lower) + d.to_scale(d.upper)));
        } else if (!parse_double(t, v)) {
          throw UsageError("bad target for " + d.name);
        }
        target[d.name] = v;
      }
      return [sp, target](const Params& p, std::uint64_t) {
        double s = 0;
        for (const auto& d : sp.continuous()) {
          const double z = (d.to_scale(param_real(p, d.name)) - d.to_scale(target.at(d.name))) / d.scale_width();
          s += z * z;
        }
        return -s;
      };
    }
    if (objective != "train") throw UsageError("unknown objective '" + objective + "'");
    const auto train_path = ss.input("train", get("train", ""));
    const auto dev_path = ss.input("dev", get("dev", ""));
    auto fam = std::make_shared<EmbeddingFamily>(EmbeddingFamily{"random", std::nullopt});
    std::filesystem::path emb_path;
    if (const auto e = get("embeddings", ""); !e.empty()) {
      emb_path = ss.input("embeddings", e);
      fam->name = "pretrained";
    }
    int epochs = 0;
    if (const auto parsed = parse_int_list(get("epochs", "3")); parsed.size() == 1) epochs = parsed[0];
    if (epochs < 1) throw UsageError("epochs must be a positive integer");
    auto train_pairs = std::make_shared<std::vector<LabeledPair>>();
    auto dev_pairs = std::make_shared<std::vector<LabeledPair>>();
    auto loaded = std::make_shared<bool>(false);
    const int threads = ss.threads;
    return [=](const Params& p, std::uint64_t seed) {
      if (!*loaded) {
        *train_pairs = read_pairs_tsv(train_path);
        *dev_pairs = read_pairs_tsv(dev_path);
        if (!emb_path.empty()) fam->vectors = load_embeddings(emb_path);
        *loaded = true;
      }
      TrainConfig cfg;
      cfg.learning_rate = param_real(p, "learning_rate");
      cfg.kappa = param_real(p, "kappa");
      if (p.count("init_scheme")) cfg.init_scheme = parse_init_scheme(param_choice(p, "init_scheme"));
      cfg.max_epochs = epochs;
      cfg.seed = seed;
      cfg.threads = threads;
      cfg = with_family_schedule(cfg, *fam);
      ModelSetup setup;
      setup.random_dim = 32;
      auto all = *train_pairs;
      all.insert(all.end(), dev_pairs->begin(), dev_pairs->end());
      const auto labels = collect_labels(all);
      auto model = build_model(*train_pairs, labels, *fam, setup, cfg);
      const Vocabulary vocab(model.vocab);
      const auto tr = encode_pairs(*train_pairs, vocab, labels);
      const auto dv = encode_pairs(*dev_pairs, vocab, labels);
      return embnli::train<double>(std::move(model), tr, dv, cfg).log.best_dev_accuracy();
    };
  }

  void run(Session& ss) {
    const auto sin = ss.input("space", space);
    std::map<std::string, std::string> extra;
    std::istringstream text(read_file(sin));
    const auto sp = parse_search_space(text, &extra);
    auto evaluator = make_evaluator(sp, extra, ss);
    ss.write_manifest(std::filesystem::path(out_dir) / "trials.jsonl");
    // The train objective loads its data lazily on the first trial, so with
    // several threads force the load up front.
    if (ss.threads > 1) {
      try {
        evaluator(sample(sp, ss.seed), ss.seed);
      } catch (const NumericalError&) {
      }
    }

    AnnealConfig cfg;
    cfg.shrink = shrink;
    cfg.iterations = anneal_iters;
    cfg.trials_per_iteration = trials;
    for (const auto& f : split(freeze, ','))
      if (!trim(f).empty()) cfg.freeze.insert(std::string(trim(f)));
    cfg.validate();
    SearchOptions opts;
    opts.threads = ss.threads;
    const auto coarse = coarse_search(sp, evaluator, coarse_trials > 0 ? coarse_trials : trials,
                                      derive_seed(ss.seed, 0), opts);
    const auto fine = annealed_search(sp, evaluator, cfg, coarse.best, derive_seed(ss.seed, 1), opts);

    std::filesystem::create_directories(out_dir);
    write_file_atomic(std::filesystem::path(out_dir) / "trials.jsonl", [&](std::ostream& o) {
      for (const auto* set : {&coarse.trials, &fine.trials})
        for (const auto& t : *set) o << trial_to_json_line(t) << '\n';
    });
    const auto best = trial_to_json_line(fine.best);
    write_file_atomic(std::filesystem::path(out_dir) / "best.json", [&](std::ostream& o) { o << best << '\n'; });
    *ss.out << best << '\n';
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embedding, retrofitting and NLI training toolkit", "embnli"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path, manifest_path;
  std::uint64_t seed = 1;
  int threads = 1;
  PreprocessCmd preprocess;
  RetrofitCmd retro;
  GenNegationCmd gen;
  SearchCmd search;
  TrainCmd train_cmd;
  EvalCmd eval;
  ReportCmd report;
  preprocess.add(app);
  retro.add(app);
  gen.add(app);
  search.add(app);
  train_cmd.add(app);
  eval.add(app);
  report.add(app);
  for (auto* s : app.get_subcommands({})) {
    s->add_option("--config", config_path, "Flat key = value file; flags override it");
    s->add_option("--manifest", manifest_path, "Run manifest path; default <output>.manifest.json");
    s->add_option("--seed", seed, "Random seed");
    s->add_option("--threads", threads, "Worker threads; 1 is the deterministic reference")
        ->check(CLI::PositiveNumber);
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // Splice config-file values in as flags the command line did not set.
    CLI::App* selected = nullptr;
    if (!args.empty())
      for (auto* s : app.get_subcommands({}))
        if (s->get_name() == args.front()) selected = s;
    std::vector<std::string> effective = args;
    for (std::size_t i = 0; selected && i + 1 < args.size(); ++i) {
      std::string cfg_file;
      if (args[i] == "--config") cfg_file = args[i + 1];
      if (cfg_file.empty()) continue;
      for (const auto& [key, value] : read_flat_config(input_path(cfg_file))) {
        const auto flag = "--" + key;
        if (key == "config") throw UsageError("config files cannot include other config files");
        const CLI::Option* opt = nullptr;
        try {
          opt = selected->get_option(flag);
        } catch (const CLI::OptionNotFound&) {
          throw UsageError("unknown key '" + key + "' in " + cfg_file);
        }
        if (given_on_command_line(args, flag)) continue;
        if (opt->get_type_size() == 0) {
          if (value == "true" || value == "1") effective.push_back(flag);
          else if (value != "false" && value != "0") throw UsageError("flag '" + key + "' takes true or false");
        } else {
          for (const auto& part : opt->get_expected_max() > 1 ? split(value, ',') : std::vector<std::string>{value}) {
            effective.push_back(flag);
            effective.push_back(std::string(trim(part)));
          }
        }
      }
    }
    std::vector<std::string> reversed(effective.rbegin(), effective.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 1;
    }

    Session ss;
    ss.args = args;
    ss.seed = seed;
    ss.threads = threads;
    ss.manifest_path = manifest_path;
    ss.out = &out;
    for (auto* s : app.get_subcommands()) {
      ss.sub = s;
      const auto& name = s->get_name();
      if (name == "preprocess") preprocess.run(ss);
      else if (name == "retrofit") retro.run(ss);
      else if (name == "gen-negation") gen.run(ss);
      else if (name == "search") search.run(ss);
      else if (name == "train") train_cmd.run(ss);
      else if (name == "eval") eval.run(ss);
      else if (name == "report") report.run(ss);
    }
    return 0;
  } catch (const std::exception& e) {
    err << "embnli: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace embnli
