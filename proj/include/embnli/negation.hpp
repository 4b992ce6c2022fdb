#ifndef EMBNLI_NEGATION_HPP
#define EMBNLI_NEGATION_HPP

#include "embnli/common.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace embnli {

enum class Relation { hypernym, hyponym, equal, disjoint, neutral };

inline constexpr std::array<Relation, 5> kAllRelations = {Relation::hypernym, Relation::hyponym, Relation::equal,
                                                          Relation::disjoint, Relation::neutral};

std::string_view to_string(Relation r);
Relation parse_relation(std::string_view name);

/// Converse under premise/hypothesis swap.
Relation converse(Relation r);

/// The negation table. (false, false) is the identity.
Relation negate_relation(Relation r, bool negate_p, bool negate_q);

struct Term {
  std::string word;
  int negations = 0;

  /// `not ` repeated `negations` times, then the word.
  [[nodiscard]] std::string surface() const;
  static Term parse(std::string_view surface);
  auto operator<=>(const Term&) const = default;
};

/// Step codes appended to a derivation, in the order expand_once emits them.
inline constexpr char kNegateBoth = '0';
inline constexpr char kNegateHypothesis = '1';
inline constexpr char kNegatePremise = '2';

struct NegExample {
  Term premise;
  Term hypothesis;
  Relation relation = Relation::neutral;
  Relation base_relation = Relation::neutral;
  int base_index = 0;
  std::string derivation;  ///< step codes from the base pair; length == level

  [[nodiscard]] int level() const { return static_cast<int>(derivation.size()); }
};

/// Replays negate_relation along the derivation starting at base_relation.
Relation replay_relation(const NegExample& e);

/// Each input yields (not-p, not-q), (p, not-q), (not-p, q) in that order.
std::vector<NegExample> expand_once(const std::vector<NegExample>& examples);

enum class ConflictPolicy {
  drop,        ///< remove every example of a surface pair that carries more than one label
  abort,       ///< throw DataError
  keep_first,  ///< keep the label of the first derivation in derivation order
};

ConflictPolicy parse_conflict_policy(std::string_view name);

struct NegationConfig {
  int train_depth = 2;
  std::vector<int> test_depths{3, 4, 5, 6};
  std::size_t downsample_to = 10000;
  std::uint64_t seed = 0;
  /// Test set k holds every depth in (train_depth, k] instead of exactly k.
  bool cumulative_tests = false;
  ConflictPolicy conflicts = ConflictPolicy::drop;
};

struct SplitStats {
  std::size_t derivations = 0;        ///< before any deduplication
  std::size_t distinct_pairs = 0;     ///< distinct surface pairs before conflict handling
  std::size_t conflicting_pairs = 0;  ///< surface pairs with more than one label
  std::size_t overlap_removed = 0;    ///< test pairs dropped because train has them
  std::size_t pool = 0;               ///< size before downsampling
};

struct NegationDataset {
  std::vector<NegExample> train;
  std::map<int, std::vector<NegExample>> tests;
  SplitStats train_stats;
  std::map<int, SplitStats> test_stats;
};

NegationDataset generate_dataset(const std::vector<NegExample>& base, const NegationConfig& cfg);

/// Largest-remainder apportionment of `total` across labels in proportion to
/// `counts`. Ties go to the earlier label in kAllRelations order.
std::map<Relation, std::size_t> apportion(const std::map<Relation, std::size_t>& counts, std::size_t total);

/// Finite-universe set semantics: each word denotes a subset, `not` is the
/// complement.
struct Denotations {
  std::size_t universe_size = 0;
  std::map<std::string, std::vector<bool>> sets;
};

/// Relation between the denotations of p and q. Requires both base words to
/// denote nonempty proper subsets whose union is not the whole universe.
Relation set_semantics_oracle(const Denotations& d, const Term& p, const Term& q);

/// `premise<TAB>hypothesis<TAB>relation` lines.
void write_negation_tsv(std::ostream& out, const std::vector<NegExample>& examples);
void write_negation_tsv(const std::filesystem::path& path, const std::vector<NegExample>& examples);
/// Reads base pairs; terms may carry `not` prefixes.
std::vector<NegExample> read_negation_tsv(std::istream& in);
std::vector<NegExample> read_negation_tsv(const std::filesystem::path& path);

}  // namespace embnli

#endif  // EMBNLI_NEGATION_HPP
