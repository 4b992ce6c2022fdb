#include "embnli/retrofit.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

namespace embnli {

namespace {
const std::set<std::string> kNoNeighbors;
}

Lexicon::Lexicon(Adjacency adjacency) : adjacency_(std::move(adjacency)) {
  for (const auto& [word, nbs] : adjacency_) {
    if (word.empty()) throw DataError("lexicon contains an empty word");
    for (const auto& n : nbs) {
      if (n == word) throw DataError("lexicon has a self-loop on '" + word + "'");
      auto it = adjacency_.find(n);
      if (it == adjacency_.end() || !it->second.contains(word))
        throw DataError("asymmetric lexicon: '" + word + "' -> '" + n + "' has no reverse edge");
    }
  }
}

Lexicon Lexicon::from_edges(const std::vector<std::pair<std::string, std::string>>& edges) {
  Adjacency adj;
  for (const auto& [a, b] : edges) {
    if (a == b) continue;
    adj[a].insert(b);
    adj[b].insert(a);
  }
  return Lexicon(std::move(adj));
}

const std::set<std::string>& Lexicon::neighbors(const std::string& word) const {
  auto it = adjacency_.find(word);
  return it == adjacency_.end() ? kNoNeighbors : it->second;
}

std::size_t Lexicon::num_edges() const {
  std::size_t n = 0;
  for (const auto& [w, nbs] : adjacency_) n += nbs.size();
  return n / 2;
}

std::string casefold(std::string_view token) {
  std::string out(token);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
  });
  return out;
}

Lexicon load_lexicon(std::istream& in) {
  Lexicon::Adjacency adj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line.front() == ' ' || line.front() == '\t')
      throw DataError("line " + std::to_string(line_no) + ": empty word token");
    auto fields = split_ws(line);
    const auto word = casefold(fields[0]);
    adj.try_emplace(word);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      auto n = casefold(fields[k]);
      if (n == word) continue;
      adj[word].insert(n);
      adj[n].insert(word);
    }
  }
  return Lexicon(std::move(adj));
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon '" + path.string() + "'");
  return load_lexicon(in);
}

void RetrofitConfig::validate() const {
  if (!(alpha >= 0)) throw UsageError("alpha must be non-negative");
  for (const auto& [w, a] : alpha_overrides)
    if (!(a >= 0)) throw UsageError("alpha for '" + w + "' must be non-negative");
  if (max_iterations < 1) throw UsageError("max_iterations must be at least 1");
  if (!(convergence_tol >= 0)) throw UsageError("convergence_tol must be non-negative");
  if (beta_rule == BetaRule::uniform && !(uniform_beta > 0)) throw UsageError("uniform beta must be positive");
}

RowGraph project_lexicon(const std::vector<std::string>& vocab, const Lexicon& lex) {
  std::unordered_map<std::string, std::vector<Eigen::Index>> rows_by_key;
  for (std::size_t j = 0; j < vocab.size(); ++j) rows_by_key[casefold(vocab[j])].push_back(static_cast<Eigen::Index>(j));

  RowGraph g;
  g.neighbors.resize(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    auto& out = g.neighbors[j];
    for (const auto& n : lex.neighbors(casefold(vocab[j]))) {
      auto it = rows_by_key.find(n);
      if (it == rows_by_key.end()) continue;
      for (auto i : it->second)
        if (i != static_cast<Eigen::Index>(j)) out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return g;
}

}  // namespace embnli
