#ifndef EMBNLI_DATASET_HPP
#define EMBNLI_DATASET_HPP

#include "embnli/common.hpp"
#include "embnli/seq2seq.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace embnli {

/// One `premise<TAB>hypothesis<TAB>label` record, sentences whitespace-tokenized.
struct LabeledPair {
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  std::string label;
};

std::vector<LabeledPair> read_pairs_tsv(std::istream& in);
std::vector<LabeledPair> read_pairs_tsv(const std::filesystem::path& path);
void write_pairs_tsv(std::ostream& out, const std::vector<LabeledPair>& pairs);
void write_pairs_tsv(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs);

/// Every token appearing in the pairs, in first-appearance order.
std::vector<std::string> collect_tokens(const std::vector<LabeledPair>& pairs);

/// Sorted unique labels.
std::vector<std::string> collect_labels(const std::vector<LabeledPair>& pairs);

/// Token ids against a vocabulary whose row 0 is `<unk>`; unknown tokens map to 0.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  [[nodiscard]] int id(const std::string& token) const;
  [[nodiscard]] std::size_t size() const { return tokens_.size(); }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

std::vector<EncodedExample> encode_pairs(const std::vector<LabeledPair>& pairs, const Vocabulary& vocab,
                                         const std::vector<std::string>& labels);

struct Split {
  std::vector<LabeledPair> train, dev, test;
};

/// Seeded shuffle, then floor(0.8 n) / floor(0.1 n) / remainder.
Split split_80_10_10(std::vector<LabeledPair> pairs, std::uint64_t seed);

}  // namespace embnli

#endif  // EMBNLI_DATASET_HPP
