#include "embnli/hypersearch.hpp"

#include "embnli/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <random>
#include <thread>

namespace embnli {

double ContinuousDim::to_scale(double x) const { return scale == Scale::log_uniform ? std::log(x) : x; }
double ContinuousDim::from_scale(double t) const { return scale == Scale::log_uniform ? std::exp(t) : t; }

double param_real(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end() || !std::holds_alternative<double>(it->second))
    throw UsageError("missing real parameter '" + name + "'");
  return std::get<double>(it->second);
}

const std::string& param_choice(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end() || !std::holds_alternative<std::string>(it->second))
    throw UsageError("missing categorical parameter '" + name + "'");
  return std::get<std::string>(it->second);
}

SearchSpace::SearchSpace(std::vector<ContinuousDim> continuous, std::vector<CategoricalDim> categorical)
    : continuous_(std::move(continuous)), categorical_(std::move(categorical)) {
  std::set<std::string> names;
  for (const auto& d : continuous_) {
    if (!(d.lower < d.upper)) throw UsageError("dimension '" + d.name + "': lower must be < upper");
    if (d.scale == Scale::log_uniform && !(d.lower > 0))
      throw UsageError("dimension '" + d.name + "': log_uniform needs lower > 0");
    if (!names.insert(d.name).second) throw UsageError("duplicate dimension '" + d.name + "'");
  }
  for (const auto& c : categorical_) {
    if (c.choices.empty()) throw UsageError("categorical dimension '" + c.name + "' has no choices");
    if (!names.insert(c.name).second) throw UsageError("duplicate dimension '" + c.name + "'");
  }
}

bool SearchSpace::contains(const Params& p) const {
  for (const auto& d : continuous_) {
    auto it = p.find(d.name);
    if (it == p.end() || !std::holds_alternative<double>(it->second)) return false;
    const double v = std::get<double>(it->second);
    if (!(v >= d.lower && v <= d.upper)) return false;
  }
  for (const auto& c : categorical_) {
    auto it = p.find(c.name);
    if (it == p.end() || !std::holds_alternative<std::string>(it->second)) return false;
    if (std::find(c.choices.begin(), c.choices.end(), std::get<std::string>(it->second)) == c.choices.end())
      return false;
  }
  return true;
}

SearchSpace parse_search_space(std::istream& in, std::map<std::string, std::string>* extra) {
  std::vector<ContinuousDim> cont;
  std::vector<CategoricalDim> cat;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos) throw DataError("search space line " + std::to_string(line_no) + ": expected 'name = ...'");
    std::string key(trim(body.substr(0, eq)));
    auto value = trim(body.substr(eq + 1));
    auto fields = split_ws(value);
    const auto here = "search space line " + std::to_string(line_no) + ": ";
    const bool is_dim = key.find('.') == std::string::npos && !fields.empty() &&
                        (fields[0] == "uniform" || fields[0] == "log_uniform" || fields[0] == "choice");
    if (!is_dim) {
      if (!extra) throw DataError(here + "unknown dimension kind");
      (*extra)[key] = std::string(value);
      continue;
    }
    if (fields[0] == "choice") {
      CategoricalDim c{key, {}};
      for (std::size_t k = 1; k < fields.size(); ++k) c.choices.emplace_back(fields[k]);
      cat.push_back(std::move(c));
      continue;
    }
    double lo = 0, hi = 0;
    if (fields.size() != 3 || !parse_double(fields[1], lo) || !parse_double(fields[2], hi))
      throw DataError(here + "expected '" + std::string(fields[0]) + " <lower> <upper>'");
    cont.push_back({key, lo, hi, fields[0] == "log_uniform" ? Scale::log_uniform : Scale::uniform});
  }
  try {
    return SearchSpace(std::move(cont), std::move(cat));
  } catch (const UsageError& e) {
    throw DataError(e.what());
  }
}

void AnnealConfig::validate() const {
  if (!(shrink > 0 && shrink < 1)) throw UsageError("anneal shrink must lie in (0, 1)");
  if (iterations < 1) throw UsageError("anneal iterations must be positive");
  if (trials_per_iteration < 1) throw UsageError("trials per iteration must be positive");
}

namespace {

using Box = std::map<std::string, std::pair<double, double>>;

Params sample_box(const SearchSpace& space, const Box& box, const Params* fixed, const std::set<std::string>& freeze,
                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Params p;
  for (const auto& d : space.continuous()) {
    if (fixed && freeze.contains(d.name)) {
      p[d.name] = param_real(*fixed, d.name);
      continue;
    }
    const auto [lo, hi] = box.at(d.name);
    std::uniform_real_distribution<double> u(lo, hi);
    const double t = hi > lo ? u(rng) : lo;
    p[d.name] = std::clamp(d.from_scale(t), d.lower, d.upper);
  }
  for (const auto& c : space.categorical()) {
    if (fixed) {
      p[c.name] = param_choice(*fixed, c.name);
      continue;
    }
    std::uniform_int_distribution<std::size_t> u(0, c.choices.size() - 1);
    p[c.name] = c.choices[u(rng)];
  }
  return p;
}

Box full_box(const SearchSpace& space) {
  Box box;
  for (const auto& d : space.continuous()) box[d.name] = {d.to_scale(d.lower), d.to_scale(d.upper)};
  return box;
}

double safe_evaluate(const Evaluator& evaluator, const Trial& t) {
  try {
    const double s = evaluator(t.params, t.seed);
    if (std::isnan(s)) {
      warn("trial " + std::to_string(t.iteration) + "/" + std::to_string(t.index) + " scored NaN; recorded as -inf");
      return -std::numeric_limits<double>::infinity();
    }
    return s;
  } catch (const std::exception& e) {
    warn("trial " + std::to_string(t.iteration) + "/" + std::to_string(t.index) + " failed: " + e.what());
    return -std::numeric_limits<double>::infinity();
  }
}

void evaluate_all(std::vector<Trial>& trials, const Evaluator& evaluator, int threads) {
  auto run_one = [&](Trial& t) {
    const auto t0 = std::chrono::steady_clock::now();
    t.score = safe_evaluate(evaluator, t);
    t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const auto n = trials.size();
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (auto& t : trials) run_one(t);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) run_one(trials[i]);
    });
}

std::uint64_t trial_seed(std::uint64_t seed, int iteration, int index) {
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(iteration)), static_cast<std::uint64_t>(index));
}

}  // namespace

Params sample(const SearchSpace& space, std::uint64_t seed) {
  return sample_box(space, full_box(space), nullptr, {}, seed);
}

SearchResult coarse_search(const SearchSpace& space, const Evaluator& evaluator, int n, std::uint64_t seed,
                           const SearchOptions& opts) {
  if (n < 1) throw UsageError("coarse_search needs at least one trial");
  SearchResult result;
  result.trials.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& t = result.trials[static_cast<std::size_t>(i)];
    t.iteration = 0;
    t.index = i;
    t.seed = trial_seed(seed, 0, i);
    t.params = sample(space, t.seed);
  }
  evaluate_all(result.trials, evaluator, opts.threads);
  result.best = result.trials.front();
  for (const auto& t : result.trials) {
    if (opts.on_trial) opts.on_trial(t);
    if (t.score > result.best.score) result.best = t;
  }
  result.best_so_far.push_back(result.best.score);
  return result;
}

SearchResult annealed_search(const SearchSpace& space, const Evaluator& evaluator, const AnnealConfig& cfg,
                             const Trial& start, std::uint64_t seed, const SearchOptions& opts) {
  cfg.validate();
  if (!space.contains(start.params)) throw UsageError("annealed_search: start point lies outside the search space");
  for (const auto& f : cfg.freeze) {
    const bool known = std::any_of(space.continuous().begin(), space.continuous().end(),
                                   [&](const ContinuousDim& d) { return d.name == f; });
    if (!known) throw UsageError("cannot freeze unknown continuous dimension '" + f + "'");
  }

  SearchResult result;
  result.best = start;
  result.best_so_far.push_back(start.score);
  for (int k = 1; k <= cfg.iterations; ++k) {
    AnnealWindow window;
    window.iteration = k;
    Box box;
    const double factor = std::pow(cfg.shrink, k);
    for (const auto& d : space.continuous()) {
      const double lo0 = d.to_scale(d.lower), hi0 = d.to_scale(d.upper);
      const double width = factor * (hi0 - lo0);
      const double center = d.to_scale(param_real(result.best.params, d.name));
      box[d.name] = {std::max(lo0, center - width / 2), std::min(hi0, center + width / 2)};
      window.nominal_width[d.name] = width;
    }
    window.bounds = box;
    result.windows.push_back(window);

    const Params incumbent = result.best.params;
    std::vector<Trial> batch(static_cast<std::size_t>(cfg.trials_per_iteration));
    for (int i = 0; i < cfg.trials_per_iteration; ++i) {
      auto& t = batch[static_cast<std::size_t>(i)];
      t.iteration = k;
      t.index = i;
      t.seed = trial_seed(seed, k, i);
      t.params = sample_box(space, box, &incumbent, cfg.freeze, t.seed);
    }
    evaluate_all(batch, evaluator, opts.threads);
    for (auto& t : batch) {
      if (opts.on_trial) opts.on_trial(t);
      if (t.score > result.best.score) result.best = t;
      result.trials.push_back(std::move(t));
    }
    result.best_so_far.push_back(result.best.score);
  }
  return result;
}

std::string trial_to_json_line(const Trial& t) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : t.params) {
    if (std::holds_alternative<double>(v))
      params[k] = std::get<double>(v);
    else
      params[k] = std::get<std::string>(v);
  }
  nlohmann::json j{{"iteration", t.iteration}, {"index", t.index}, {"params", params},
                   {"seed", t.seed},           {"wall_seconds", t.wall_seconds}};
  j["score"] = std::isfinite(t.score) ? nlohmann::json(t.score) : nlohmann::json(nullptr);
  return j.dump();
}

Trial trial_from_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    Trial t;
    t.iteration = j.at("iteration").get<int>();
    t.index = j.at("index").get<int>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.wall_seconds = j.value("wall_seconds", 0.0);
    t.score = j.at("score").is_null() ? -std::numeric_limits<double>::infinity() : j.at("score").get<double>();
    for (const auto& [k, v] : j.at("params").items()) {
      if (v.is_string())
        t.params[k] = v.get<std::string>();
      else
        t.params[k] = v.get<double>();
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed trial record: ") + e.what());
  }
}

}  // namespace embnli
