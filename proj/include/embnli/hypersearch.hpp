#ifndef EMBNLI_HYPERSEARCH_HPP
#define EMBNLI_HYPERSEARCH_HPP

#include "embnli/common.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace embnli {

enum class Scale { uniform, log_uniform };

struct ContinuousDim {
  std::string name;
  double lower = 0;
  double upper = 1;
  Scale scale = Scale::uniform;

  /// Maps a value into sampling space (log for log_uniform).
  [[nodiscard]] double to_scale(double x) const;
  [[nodiscard]] double from_scale(double t) const;
  [[nodiscard]] double scale_width() const { return to_scale(upper) - to_scale(lower); }
};

struct CategoricalDim {
  std::string name;
  std::vector<std::string> choices;
};

using ParamValue = std::variant<double, std::string>;
using Params = std::map<std::string, ParamValue>;

double param_real(const Params& p, const std::string& name);
const std::string& param_choice(const Params& p, const std::string& name);

class SearchSpace {
 public:
  SearchSpace() = default;
  SearchSpace(std::vector<ContinuousDim> continuous, std::vector<CategoricalDim> categorical);

  [[nodiscard]] const std::vector<ContinuousDim>& continuous() const { return continuous_; }
  [[nodiscard]] const std::vector<CategoricalDim>& categorical() const { return categorical_; }
  [[nodiscard]] bool contains(const Params& p) const;

 private:
  std::vector<ContinuousDim> continuous_;
  std::vector<CategoricalDim> categorical_;
};

/// Flat `name = kind args...` lines, kinds: `uniform lo hi`, `log_uniform lo hi`,
/// `choice a b ...`. `#` starts a comment. Lines whose key contains a dot or
/// matches none of the kinds are returned in `extra` for the caller.
SearchSpace parse_search_space(std::istream& in, std::map<std::string, std::string>* extra = nullptr);

struct Trial {
  Params params;
  double score = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  int iteration = 0;  ///< 0 = coarse stage
  int index = 0;      ///< position within its iteration
  double wall_seconds = 0;
};

struct AnnealConfig {
  double shrink = 0.9;
  int iterations = 5;
  int trials_per_iteration = 50;
  /// Continuous dims pinned to the incumbent during refinement.
  std::set<std::string> freeze;
  void validate() const;
};

/// The box sampled in one annealing iteration, in sampling scale.
struct AnnealWindow {
  int iteration = 0;
  std::map<std::string, double> nominal_width;
  std::map<std::string, std::pair<double, double>> bounds;
};

struct SearchOptions {
  int threads = 1;
  /// Called once per evaluated trial, in (iteration, index) order.
  std::function<void(const Trial&)> on_trial;
};

/// Evaluator receives the trial's params and its derived seed; higher is better.
using Evaluator = std::function<double(const Params&, std::uint64_t seed)>;

struct SearchResult {
  Trial best;
  std::vector<Trial> trials;
  std::vector<AnnealWindow> windows;
  std::vector<double> best_so_far;  ///< after each iteration (index 0 = start)
};

Params sample(const SearchSpace& space, std::uint64_t seed);

SearchResult coarse_search(const SearchSpace& space, const Evaluator& evaluator, int n, std::uint64_t seed,
                           const SearchOptions& opts = {});

SearchResult annealed_search(const SearchSpace& space, const Evaluator& evaluator, const AnnealConfig& cfg,
                             const Trial& start, std::uint64_t seed, const SearchOptions& opts = {});

/// JSON object per line: iteration, index, params, score (null for -inf), seed, wall_seconds.
std::string trial_to_json_line(const Trial& t);
Trial trial_from_json_line(const std::string& line);

}  // namespace embnli

#endif  // EMBNLI_HYPERSEARCH_HPP
