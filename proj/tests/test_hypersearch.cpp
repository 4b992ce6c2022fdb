#include "embnli/hypersearch.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace embnli;

namespace {

SearchSpace lr_space() { return SearchSpace({{"lr", 0.001, 3.0, Scale::log_uniform}}, {}); }

}  // namespace

TEST_CASE("log-uniform sampling is uniform in log space") {
  const auto space = lr_space();
  const double mid = std::sqrt(0.001 * 3.0);
  int below = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) below += param_real(sample(space, static_cast<std::uint64_t>(i)), "lr") < mid;
  CHECK(std::abs(below / static_cast<double>(n) - 0.5) < 0.01);
  CHECK(param_real(sample(space, 5), "lr") == param_real(sample(space, 5), "lr"));
}

TEST_CASE("collapsed interval") {
  const SearchSpace space({{"x", 1.0, 1.0 + 1e-12, Scale::uniform}}, {});
  for (int i = 0; i < 100; ++i) CHECK(param_real(sample(space, static_cast<std::uint64_t>(i)), "x") == doctest::Approx(1.0));
}

TEST_CASE("space file parsing") {
  std::istringstream in(
      "# comment\nlr = log_uniform 0.001 3\nkappa = uniform 0.1 2\ninit = choice gaussian orthogonal\n"
      "objective = quadratic\ntarget.lr = 0.1\n");
  std::map<std::string, std::string> extra;
  const auto s = parse_search_space(in, &extra);
  CHECK(s.continuous().size() == 2);
  CHECK(s.categorical().size() == 1);
  CHECK(extra.at("objective") == "quadratic");
  CHECK(extra.at("target.lr") == "0.1");

  std::istringstream bad("lr = log_uniform 0 3\n");
  CHECK_THROWS(parse_search_space(bad));
}

TEST_CASE("coarse search") {
  const auto space = lr_space();
  const Evaluator f = [](const Params& p, std::uint64_t) {
    const double z = std::log(param_real(p, "lr")) - std::log(0.1);
    return -z * z;
  };
  const auto one = coarse_search(space, f, 1, 3);
  CHECK(one.trials.size() == 1);
  CHECK(one.best.params == one.trials[0].params);

  const auto r = coarse_search(space, f, 500, 3);
  const double best = param_real(r.best.params, "lr");
  CHECK(best >= 0.05);
  CHECK(best <= 0.2);

  const Evaluator fails = [](const Params&, std::uint64_t) -> double { throw std::runtime_error("boom"); };
  set_warning_handler([](const std::string&) {});
  const auto bad = coarse_search(space, fails, 4, 1);
  set_warning_handler({});
  CHECK(bad.trials.size() == 4);
  CHECK(std::isinf(bad.best.score));
  CHECK(bad.best.score < 0);
}

TEST_CASE("annealing windows") {
  const SearchSpace space({{"x", 0.0, 1.0, Scale::uniform}, {"y", 0.001, 3.0, Scale::log_uniform}},
                          {{"init", {"gaussian", "orthogonal"}}});
  const Evaluator f = [](const Params& p, std::uint64_t) { return -std::abs(param_real(p, "x") - 0.3); };
  Trial start;
  start.params = {{"x", 0.0}, {"y", 3.0}, {"init", std::string("orthogonal")}};
  start.score = f(start.params, 0);
  AnnealConfig cfg;
  cfg.iterations = 3;
  cfg.trials_per_iteration = 20;
  const auto r = annealed_search(space, f, cfg, start, 9);
  REQUIRE(r.windows.size() == 3);
  CHECK(r.windows[2].nominal_width.at("x") == doctest::Approx(0.729));
  // Starting at a corner, the first window is clipped to the original bounds.
  CHECK(r.windows[0].bounds.at("x").first == 0.0);
  CHECK(r.windows[0].bounds.at("x").second == doctest::Approx(0.45));
  CHECK(r.windows[0].bounds.at("y").second == doctest::Approx(std::log(3.0)));
  for (const auto& t : r.trials) {
    CHECK(param_choice(t.params, "init") == "orthogonal");
    CHECK(space.contains(t.params));
  }
  for (std::size_t k = 1; k < r.best_so_far.size(); ++k) CHECK(r.best_so_far[k] >= r.best_so_far[k - 1]);
}

TEST_CASE("frozen dims stay at the incumbent") {
  const SearchSpace space({{"x", 0.0, 1.0, Scale::uniform}, {"y", 0.0, 1.0, Scale::uniform}}, {});
  const Evaluator f = [](const Params& p, std::uint64_t) { return -param_real(p, "x"); };
  Trial start;
  start.params = {{"x", 0.5}, {"y", 0.25}};
  start.score = -0.5;
  AnnealConfig cfg;
  cfg.iterations = 2;
  cfg.trials_per_iteration = 10;
  cfg.freeze = {"y"};
  for (const auto& t : annealed_search(space, f, cfg, start, 1).trials) CHECK(param_real(t.params, "y") == 0.25);
  cfg.freeze = {"nope"};
  CHECK_THROWS_AS(annealed_search(space, f, cfg, start, 1), UsageError);
}

TEST_CASE("threads do not change results") {
  const auto space = lr_space();
  const Evaluator f = [](const Params& p, std::uint64_t seed) { return -param_real(p, "lr") + 1e-9 * (seed % 7); };
  SearchOptions one, four;
  four.threads = 4;
  const auto a = coarse_search(space, f, 40, 2, one);
  const auto b = coarse_search(space, f, 40, 2, four);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].params == b.trials[i].params);
    CHECK(a.trials[i].score == b.trials[i].score);
  }
}

TEST_CASE("trial JSON round-trip") {
  Trial t;
  t.params = {{"lr", 0.125}, {"init", std::string("gaussian")}};
  t.score = 0.75;
  t.seed = 99;
  t.iteration = 2;
  t.index = 7;
  const auto back = trial_from_json_line(trial_to_json_line(t));
  CHECK(back.params == t.params);
  CHECK(back.score == t.score);
  CHECK(back.seed == 99);
  Trial failed;
  CHECK(std::isinf(trial_from_json_line(trial_to_json_line(failed)).score));
  CHECK_THROWS_AS(trial_from_json_line("{"), DataError);
}
