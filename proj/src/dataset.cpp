#include "embnli/dataset.hpp"

#include "embnli/embedding.hpp"
#include "embnli/io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>

namespace embnli {

std::vector<LabeledPair> read_pairs_tsv(std::istream& in) {
  std::vector<LabeledPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    const auto here = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 3) throw DataError(here + "expected premise<TAB>hypothesis<TAB>label");
    LabeledPair p;
    for (auto t : split_ws(fields[0])) p.premise.emplace_back(t);
    for (auto t : split_ws(fields[1])) p.hypothesis.emplace_back(t);
    p.label = std::string(trim(fields[2]));
    if (p.premise.empty() || p.hypothesis.empty()) throw DataError(here + "empty premise or hypothesis");
    if (p.label.empty()) throw DataError(here + "empty label");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<LabeledPair> read_pairs_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  try {
    return read_pairs_tsv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_pairs_tsv(std::ostream& out, const std::vector<LabeledPair>& pairs) {
  auto join = [](const std::vector<std::string>& ts) {
    std::string s;
    for (const auto& t : ts) s += (s.empty() ? "" : " ") + t;
    return s;
  };
  for (const auto& p : pairs) out << join(p.premise) << '\t' << join(p.hypothesis) << '\t' << p.label << '\n';
}

void write_pairs_tsv(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs) {
  write_file_atomic(path, [&](std::ostream& out) { write_pairs_tsv(out, pairs); });
}

std::vector<std::string> collect_tokens(const std::vector<LabeledPair>& pairs) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : pairs) {
    for (const auto& t : p.premise)
      if (seen.insert(t).second) out.push_back(t);
    for (const auto& t : p.hypothesis)
      if (seen.insert(t).second) out.push_back(t);
  }
  return out;
}

std::vector<std::string> collect_labels(const std::vector<LabeledPair>& pairs) {
  std::set<std::string> s;
  for (const auto& p : pairs) s.insert(p.label);
  return {s.begin(), s.end()};
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty() || tokens_.front() != kUnknownToken)
    throw UsageError(std::string("vocabulary must start with ") + kUnknownToken);
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "'");
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? 0 : it->second;
}

std::vector<EncodedExample> encode_pairs(const std::vector<LabeledPair>& pairs, const Vocabulary& vocab,
                                         const std::vector<std::string>& labels) {
  std::unordered_map<std::string, int> label_ids;
  for (std::size_t i = 0; i < labels.size(); ++i) label_ids.emplace(labels[i], static_cast<int>(i));
  std::vector<EncodedExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto it = label_ids.find(p.label);
    if (it == label_ids.end()) throw DataError("label '" + p.label + "' is not in the model's label set");
    EncodedExample e;
    for (const auto& t : p.premise) e.premise.push_back(vocab.id(t));
    for (const auto& t : p.hypothesis) e.hypothesis.push_back(vocab.id(t));
    e.label = it->second;
    out.push_back(std::move(e));
  }
  return out;
}

Split split_80_10_10(std::vector<LabeledPair> pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  const auto n = pairs.size();
  const auto n_train = n * 8 / 10, n_dev = n / 10;
  Split s;
  s.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.dev.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
               pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
  s.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), pairs.end());
  return s;
}

}  // namespace embnli
