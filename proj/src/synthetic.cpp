#include "embnli/synthetic.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace embnli {

std::vector<std::string> PlantedLexicon::vocabulary() const {
  std::vector<std::string> out;
  for (const auto& ws : words) out.insert(out.end(), ws.begin(), ws.end());
  return out;
}

Lexicon PlantedLexicon::lexicon() const {
  std::vector<std::pair<std::string, std::string>> edges;
  for (std::size_t c = 0; c < words.size(); ++c) {
    for (std::size_t i = 0; i < words[c].size(); ++i)
      for (std::size_t j = i + 1; j < words[c].size(); ++j) edges.emplace_back(words[c][i], words[c][j]);
    if (parent[c] >= 0)
      for (const auto& w : words[c])
        for (const auto& pw : words[static_cast<std::size_t>(parent[c])]) edges.emplace_back(w, pw);
  }
  return Lexicon::from_edges(edges);
}

Relation PlantedLexicon::relation(int a, int b) const {
  if (a == b) return Relation::equal;
  const auto pa = parent.at(static_cast<std::size_t>(a));
  const auto pb = parent.at(static_cast<std::size_t>(b));
  if (pa == b) return Relation::hyponym;
  if (pb == a) return Relation::hypernym;
  if (pa == pb) return Relation::disjoint;
  return Relation::neutral;
}

PlantedLexicon planted_hierarchy(const PlantedConfig& cfg) {
  if (cfg.roots < 1 || cfg.branching < 1 || cfg.depth < 0 || cfg.synonyms < 1)
    throw UsageError("planted hierarchy needs positive sizes");
  PlantedLexicon lex;
  std::vector<int> frontier;
  for (int r = 0; r < cfg.roots; ++r) {
    lex.parent.push_back(-1);
    frontier.push_back(static_cast<int>(lex.parent.size()) - 1);
  }
  for (int level = 0; level < cfg.depth; ++level) {
    std::vector<int> next;
    for (int p : frontier)
      for (int k = 0; k < cfg.branching; ++k) {
        lex.parent.push_back(p);
        next.push_back(static_cast<int>(lex.parent.size()) - 1);
      }
    frontier = std::move(next);
  }
  // Token names carry no structure; a seeded permutation decouples them from
  // concept order.
  const auto n_tokens = lex.parent.size() * static_cast<std::size_t>(cfg.synonyms);
  std::vector<std::size_t> ids(n_tokens);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  lex.words.resize(lex.parent.size());
  std::size_t next_id = 0;
  for (auto& ws : lex.words)
    for (int s = 0; s < cfg.synonyms; ++s) ws.push_back("w" + std::to_string(ids[next_id++]));
  return lex;
}

namespace {

struct WordPair {
  std::string p, q;
  Relation rel;
};

std::vector<WordPair> sample_pairs(const PlantedLexicon& lex, std::size_t n, std::uint64_t seed) {
  const std::array<Relation, 4> wanted{Relation::hypernym, Relation::hyponym, Relation::equal, Relation::disjoint};
  std::map<Relation, std::vector<WordPair>> pools;
  const auto nc = static_cast<int>(lex.num_concepts());
  for (int a = 0; a < nc; ++a)
    for (int b = 0; b < nc; ++b) {
      const auto rel = lex.relation(a, b);
      if (rel == Relation::neutral) continue;
      for (const auto& wa : lex.words[static_cast<std::size_t>(a)])
        for (const auto& wb : lex.words[static_cast<std::size_t>(b)])
          if (wa != wb) pools[rel].push_back({wa, wb, rel});
    }
  std::mt19937_64 rng(seed);
  std::vector<WordPair> out;
  for (auto rel : wanted) {
    auto& pool = pools[rel];
    std::shuffle(pool.begin(), pool.end(), rng);
    const auto take = std::min(pool.size(), n / wanted.size());
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace

std::vector<LabeledPair> planted_word_pairs(const PlantedLexicon& lex, std::size_t n, std::uint64_t seed) {
  std::vector<LabeledPair> out;
  for (auto& wp : sample_pairs(lex, n, seed)) out.push_back({{wp.p}, {wp.q}, std::string(to_string(wp.rel))});
  return out;
}

std::vector<NegExample> planted_negation_base(const PlantedLexicon& lex, std::size_t n, std::uint64_t seed) {
  std::vector<NegExample> out;
  int index = 0;
  for (auto& wp : sample_pairs(lex, n, seed)) {
    NegExample e;
    e.premise = Term{wp.p, 0};
    e.hypothesis = Term{wp.q, 0};
    e.relation = e.base_relation = wp.rel;
    e.base_index = index++;
    out.push_back(std::move(e));
  }
  return out;
}

EmbeddingMatrix<double> planted_plain_embeddings(const PlantedLexicon& lex, int dim, std::uint64_t seed) {
  auto vocab = lex.vocabulary();
  vocab.emplace_back(kNegationToken);
  return random_embeddings<double>(std::move(vocab), dim, 1.0, seed);
}

SeparableTask separable_word_pairs(std::size_t n_train, std::size_t n_dev, int dim, std::size_t vocab_size,
                                   double margin, std::uint64_t seed) {
  if (vocab_size < 2 || n_train == 0 || n_dev == 0) throw UsageError("separable task needs data");
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < vocab_size; ++i) vocab.push_back("t" + std::to_string(i));
  auto emb = random_embeddings<double>(vocab, dim, 1.0, derive_seed(seed, 1));
  std::mt19937_64 rng(derive_seed(seed, 2));
  std::normal_distribution<double> normal;
  Vector<double> u(dim);
  for (auto& x : u) x = normal(rng);
  u.normalize();
  const Vector<double> proj = emb.vectors() * u;

  std::uniform_int_distribution<std::size_t> pick(0, vocab_size - 1);
  auto draw = [&](const std::set<std::size_t>* allowed) {
    for (int attempt = 0; attempt < 1000000; ++attempt) {
      const auto a = pick(rng), b = pick(rng);
      if (allowed && (!allowed->count(a) || !allowed->count(b))) continue;
      const double s = proj(static_cast<Eigen::Index>(a)) + proj(static_cast<Eigen::Index>(b));
      if (std::abs(s) < margin) continue;
      return LabeledPair{{vocab[a]}, {vocab[b]}, s > 0 ? "pos" : "neg"};
    }
    throw UsageError("separable task: margin leaves no admissible pairs");
  };
  SeparableTask task{emb, {}, {}};
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < n_train; ++i) {
    task.train.push_back(draw(nullptr));
    for (const auto* side : {&task.train.back().premise, &task.train.back().hypothesis})
      seen.insert(static_cast<std::size_t>(std::stoul(side->front().substr(1))));
  }
  for (std::size_t i = 0; i < n_dev; ++i) task.dev.push_back(draw(&seen));
  return task;
}

}  // namespace embnli
