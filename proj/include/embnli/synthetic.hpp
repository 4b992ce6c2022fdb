#ifndef EMBNLI_SYNTHETIC_HPP
#define EMBNLI_SYNTHETIC_HPP

#include "embnli/dataset.hpp"
#include "embnli/embedding.hpp"
#include "embnli/negation.hpp"
#include "embnli/retrofit.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace embnli {

/// A planted concept tree: `roots` top concepts, each concept below depth
/// `depth` with `branching` children, and `synonyms` tokens per concept.
struct PlantedConfig {
  int roots = 3;
  int branching = 3;
  int depth = 2;
  int synonyms = 2;
  std::uint64_t seed = 1;
};

struct PlantedLexicon {
  std::vector<int> parent;                      ///< concept -> parent concept, -1 for roots
  std::vector<std::vector<std::string>> words;  ///< concept -> synonym tokens

  [[nodiscard]] std::size_t num_concepts() const { return parent.size(); }
  /// All tokens, concept by concept.
  [[nodiscard]] std::vector<std::string> vocabulary() const;
  /// Synonym edges within a concept plus every parent-child token edge.
  [[nodiscard]] Lexicon lexicon() const;
  /// Relation of two concepts seen as sets: equal, hyponym/hypernym for a
  /// direct parent link, disjoint for siblings, neutral otherwise.
  [[nodiscard]] Relation relation(int a, int b) const;
};

PlantedLexicon planted_hierarchy(const PlantedConfig& cfg);

/// Word pairs labeled hypernym / hyponym / equal / disjoint by the planted
/// graph, up to n/4 per label drawn without replacement.
std::vector<LabeledPair> planted_word_pairs(const PlantedLexicon& lex, std::size_t n, std::uint64_t seed);

/// The same kind of pairs as level-0 negation examples.
std::vector<NegExample> planted_negation_base(const PlantedLexicon& lex, std::size_t n, std::uint64_t seed);

inline constexpr const char* kNegationToken = "not";

/// N(0, 1) vectors for every token of `lex` plus `not`.
EmbeddingMatrix<double> planted_plain_embeddings(const PlantedLexicon& lex, int dim, std::uint64_t seed);

/// Pairs of tokens whose binary label is the sign of u . (x_p + x_h) for a
/// random unit direction u; pairs within `margin` of the boundary are
/// rejected. Every dev token also occurs in train.
struct SeparableTask {
  EmbeddingMatrix<double> embeddings;
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> dev;
};

SeparableTask separable_word_pairs(std::size_t n_train, std::size_t n_dev, int dim, std::size_t vocab_size,
                                   double margin, std::uint64_t seed);

}  // namespace embnli

#endif  // EMBNLI_SYNTHETIC_HPP
