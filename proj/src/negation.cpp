#include "embnli/negation.hpp"

#include "embnli/io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <tuple>
#include <unordered_map>

namespace embnli {

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::hypernym: return "hypernym";
    case Relation::hyponym: return "hyponym";
    case Relation::equal: return "equal";
    case Relation::disjoint: return "disjoint";
    case Relation::neutral: return "neutral";
  }
  return "neutral";
}

Relation parse_relation(std::string_view name) {
  for (auto r : kAllRelations)
    if (to_string(r) == name) return r;
  throw DataError("unknown relation '" + std::string(name) + "'");
}

Relation converse(Relation r) {
  if (r == Relation::hypernym) return Relation::hyponym;
  if (r == Relation::hyponym) return Relation::hypernym;
  return r;
}

Relation negate_relation(Relation r, bool negate_p, bool negate_q) {
  if (!negate_p && !negate_q) return r;
  // Columns: (not-p, not-q), (p, not-q), (not-p, q).
  const int col = negate_p && negate_q ? 0 : (negate_q ? 1 : 2);
  using R = Relation;
  switch (r) {
    case R::disjoint: return std::array{R::neutral, R::hyponym, R::hypernym}[col];
    case R::equal: return std::array{R::equal, R::disjoint, R::disjoint}[col];
    case R::neutral: return R::neutral;
    case R::hyponym: return std::array{R::hypernym, R::disjoint, R::neutral}[col];
    case R::hypernym: return std::array{R::hyponym, R::neutral, R::disjoint}[col];
  }
  return R::neutral;
}

std::string Term::surface() const {
  std::string s;
  for (int i = 0; i < negations; ++i) s += "not ";
  return s + word;
}

Term Term::parse(std::string_view surface) {
  auto fields = split_ws(surface);
  if (fields.empty()) throw DataError("empty term");
  Term t;
  std::size_t i = 0;
  while (i + 1 < fields.size() && fields[i] == "not") {
    ++t.negations;
    ++i;
  }
  if (i + 1 != fields.size()) throw DataError("term '" + std::string(surface) + "' is not of the form (not )*word");
  t.word = std::string(fields[i]);
  return t;
}

Relation replay_relation(const NegExample& e) {
  Relation r = e.base_relation;
  for (char step : e.derivation) {
    switch (step) {
      case kNegateBoth: r = negate_relation(r, true, true); break;
      case kNegateHypothesis: r = negate_relation(r, false, true); break;
      case kNegatePremise: r = negate_relation(r, true, false); break;
      default: throw DataError("bad derivation step code");
    }
  }
  return r;
}

std::vector<NegExample> expand_once(const std::vector<NegExample>& examples) {
  std::vector<NegExample> out;
  out.reserve(examples.size() * 3);
  for (const auto& e : examples) {
    for (char step : {kNegateBoth, kNegateHypothesis, kNegatePremise}) {
      const bool np = step != kNegateHypothesis;
      const bool nq = step != kNegatePremise;
      NegExample x = e;
      x.premise.negations += np ? 1 : 0;
      x.hypothesis.negations += nq ? 1 : 0;
      x.relation = negate_relation(e.relation, np, nq);
      x.derivation.push_back(step);
      out.push_back(std::move(x));
    }
  }
  return out;
}

ConflictPolicy parse_conflict_policy(std::string_view name) {
  if (name == "drop") return ConflictPolicy::drop;
  if (name == "abort") return ConflictPolicy::abort;
  if (name == "keep-first" || name == "keep_first") return ConflictPolicy::keep_first;
  throw UsageError("unknown conflict policy '" + std::string(name) + "' (expected drop|abort|keep-first)");
}

std::map<Relation, std::size_t> apportion(const std::map<Relation, std::size_t>& counts, std::size_t total) {
  std::size_t sum = 0;
  for (const auto& [r, c] : counts) sum += c;
  std::map<Relation, std::size_t> out;
  if (sum == 0) return out;
  std::vector<std::tuple<double, int, Relation>> remainders;
  std::size_t assigned = 0;
  for (const auto& [r, c] : counts) {
    const double exact = static_cast<double>(total) * static_cast<double>(c) / static_cast<double>(sum);
    const auto base = static_cast<std::size_t>(exact);
    out[r] = base;
    assigned += base;
    remainders.emplace_back(exact - static_cast<double>(base), static_cast<int>(r), r);
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::get<1>(a) < std::get<1>(b);
  });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned) ++out[std::get<2>(remainders[i])];
  return out;
}

namespace {

using SurfaceKey = std::pair<std::string, std::string>;

SurfaceKey surface_key(const NegExample& e) { return {e.premise.surface(), e.hypothesis.surface()}; }

/// Collapses derivations that reach the same (base pair, negation counts,
/// relation) state; they have identical futures. Keeps the first in order.
std::vector<NegExample> merge_states(std::vector<NegExample> xs) {
  std::set<std::tuple<int, int, int, Relation>> seen;
  std::vector<NegExample> out;
  for (auto& x : xs)
    if (seen.emplace(x.base_index, x.premise.negations, x.hypothesis.negations, x.relation).second)
      out.push_back(std::move(x));
  return out;
}

/// Deduplicates by surface pair and applies the conflict policy. Pairs listed
/// in `exclude` are removed first.
std::vector<NegExample> resolve(const std::vector<const NegExample*>& candidates, ConflictPolicy policy,
                                const std::set<SurfaceKey>* exclude, SplitStats& stats, const std::string& split) {
  std::map<SurfaceKey, std::size_t> group_of;
  std::vector<std::vector<const NegExample*>> groups;
  for (const auto* e : candidates) {
    auto key = surface_key(*e);
    if (exclude && exclude->contains(key)) {
      ++stats.overlap_removed;
      continue;
    }
    auto [it, inserted] = group_of.emplace(std::move(key), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(e);
  }
  stats.distinct_pairs = groups.size();
  std::vector<NegExample> out;
  for (const auto& g : groups) {
    std::set<Relation> labels;
    for (const auto* e : g) labels.insert(e->relation);
    if (labels.size() > 1) {
      ++stats.conflicting_pairs;
      if (policy == ConflictPolicy::abort)
        throw DataError(split + ": surface pair '" + g.front()->premise.surface() + "' / '" +
                        g.front()->hypothesis.surface() + "' derived with conflicting labels");
      if (policy == ConflictPolicy::drop) continue;
    }
    out.push_back(*g.front());
  }
  return out;
}

std::size_t pow3(int k) {
  std::size_t v = 1;
  for (int i = 0; i < k; ++i) v *= 3;
  return v;
}

}  // namespace

NegationDataset generate_dataset(const std::vector<NegExample>& base, const NegationConfig& cfg) {
  if (base.empty()) throw DataError("negation base set is empty");
  if (cfg.train_depth < 0) throw UsageError("train depth must be non-negative");
  if (cfg.test_depths.empty()) throw UsageError("at least one test depth is required");
  for (int k : cfg.test_depths)
    if (k <= cfg.train_depth) throw UsageError("test depths must exceed the train depth");

  std::vector<std::vector<NegExample>> levels(1);
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto& b = base[i];
    if (b.relation == Relation::neutral) throw DataError("base pairs may not be labelled neutral");
    NegExample e = b;
    e.base_index = static_cast<int>(i);
    e.base_relation = b.relation;
    e.derivation.clear();
    levels[0].push_back(std::move(e));
  }
  const int max_depth = std::max(cfg.train_depth, *std::max_element(cfg.test_depths.begin(), cfg.test_depths.end()));
  for (int k = 1; k <= max_depth; ++k) levels.push_back(merge_states(expand_once(levels.back())));

  NegationDataset ds;
  std::vector<const NegExample*> train_candidates;
  for (int k = 0; k <= cfg.train_depth; ++k) {
    ds.train_stats.derivations += pow3(k) * base.size();
    for (const auto& e : levels[static_cast<std::size_t>(k)]) train_candidates.push_back(&e);
  }
  std::set<SurfaceKey> train_surfaces;
  for (const auto* e : train_candidates) train_surfaces.insert(surface_key(*e));
  ds.train = resolve(train_candidates, cfg.conflicts, nullptr, ds.train_stats, "train");
  ds.train_stats.pool = ds.train.size();
  if (ds.train_stats.conflicting_pairs > 0 && cfg.conflicts == ConflictPolicy::drop)
    warn("train: dropped " + std::to_string(ds.train_stats.conflicting_pairs) + " surface pairs with conflicting labels");

  std::map<Relation, std::size_t> train_counts;
  for (const auto& e : ds.train) ++train_counts[e.relation];

  for (int depth : cfg.test_depths) {
    SplitStats stats;
    std::vector<const NegExample*> candidates;
    const int first = cfg.cumulative_tests ? cfg.train_depth + 1 : depth;
    for (int k = first; k <= depth; ++k) {
      stats.derivations += pow3(k) * base.size();
      for (const auto& e : levels[static_cast<std::size_t>(k)]) candidates.push_back(&e);
    }
    const auto split = "test depth " + std::to_string(depth);
    auto pool = resolve(candidates, cfg.conflicts, &train_surfaces, stats, split);
    stats.pool = pool.size();

    std::vector<NegExample> selected;
    if (cfg.downsample_to == 0) {
      selected = std::move(pool);
    } else {
      const auto quotas = apportion(train_counts, cfg.downsample_to);
      std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(depth)));
      std::vector<std::size_t> keep;
      for (auto r : kAllRelations) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < pool.size(); ++i)
          if (pool[i].relation == r) idx.push_back(i);
        auto q = quotas.contains(r) ? quotas.at(r) : std::size_t{0};
        if (idx.size() < q) {
          warn(split + ": only " + std::to_string(idx.size()) + " '" + std::string(to_string(r)) +
               "' examples available for a quota of " + std::to_string(q));
          q = idx.size();
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(q));
      }
      std::sort(keep.begin(), keep.end());
      for (auto i : keep) selected.push_back(pool[i]);
    }
    if (cfg.conflicts == ConflictPolicy::drop && stats.conflicting_pairs > 0)
      warn(split + ": dropped " + std::to_string(stats.conflicting_pairs) +
           " surface pairs with conflicting labels");
    ds.tests[depth] = std::move(selected);
    ds.test_stats[depth] = stats;
  }
  return ds;
}

Relation set_semantics_oracle(const Denotations& d, const Term& p, const Term& q) {
  const auto n = d.universe_size;
  auto lookup = [&](const std::string& w) -> const std::vector<bool>& {
    auto it = d.sets.find(w);
    if (it == d.sets.end()) throw DataError("no denotation for '" + w + "'");
    if (it->second.size() != n) throw DataError("denotation of '" + w + "' has the wrong universe size");
    return it->second;
  };
  const auto& sp = lookup(p.word);
  const auto& sq = lookup(q.word);
  std::size_t cp = 0, cq = 0, cu = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cp += sp[i];
    cq += sq[i];
    cu += sp[i] || sq[i];
  }
  if (cp == 0 || cp == n || cq == 0 || cq == n)
    throw DataError("degenerate denotation: sets must be nonempty proper subsets");
  if (cu == n) throw DataError("degenerate denotations: '" + p.word + "' and '" + q.word + "' cover the universe");

  bool p_sub_q = true, q_sub_p = true, overlap = false;
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = sp[i] != (p.negations % 2 == 1);
    const bool b = sq[i] != (q.negations % 2 == 1);
    if (a && !b) p_sub_q = false;
    if (b && !a) q_sub_p = false;
    if (a && b) overlap = true;
  }
  if (p_sub_q && q_sub_p) return Relation::equal;
  if (p_sub_q) return Relation::hyponym;
  if (q_sub_p) return Relation::hypernym;
  if (!overlap) return Relation::disjoint;
  return Relation::neutral;
}

void write_negation_tsv(std::ostream& out, const std::vector<NegExample>& examples) {
  for (const auto& e : examples)
    out << e.premise.surface() << '\t' << e.hypothesis.surface() << '\t' << to_string(e.relation) << '\n';
}

void write_negation_tsv(const std::filesystem::path& path, const std::vector<NegExample>& examples) {
  write_file_atomic(path, [&](std::ostream& out) { write_negation_tsv(out, examples); });
}

std::vector<NegExample> read_negation_tsv(std::istream& in) {
  std::vector<NegExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    const auto here = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 3) throw DataError(here + "expected premise<TAB>hypothesis<TAB>relation");
    NegExample e;
    try {
      e.premise = Term::parse(fields[0]);
      e.hypothesis = Term::parse(fields[1]);
      e.relation = parse_relation(trim(fields[2]));
    } catch (const DataError& err) {
      throw DataError(here + err.what());
    }
    e.base_relation = e.relation;
    e.base_index = static_cast<int>(out.size());
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<NegExample> read_negation_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_negation_tsv(in);
}

}  // namespace embnli
