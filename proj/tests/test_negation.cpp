#include "embnli/negation.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace embnli;

namespace {

NegExample base_pair(const std::string& p, const std::string& q, Relation r) {
  NegExample e;
  e.premise = {p, 0};
  e.hypothesis = {q, 0};
  e.relation = e.base_relation = r;
  return e;
}

std::vector<bool> subset(std::size_t n, std::initializer_list<std::size_t> members) {
  std::vector<bool> s(n);
  for (auto m : members) s[m] = true;
  return s;
}

struct Quiet {
  WarningHandler previous = set_warning_handler([](const std::string&) {});
  ~Quiet() { set_warning_handler(previous); }
};

}  // namespace

TEST_CASE("negation table entries") {
  using R = Relation;
  CHECK(negate_relation(R::disjoint, true, true) == R::neutral);
  CHECK(negate_relation(R::equal, false, true) == R::disjoint);
  CHECK(negate_relation(R::hyponym, true, true) == R::hypernym);
  for (auto r : kAllRelations) CHECK(negate_relation(r, false, false) == r);
}

TEST_CASE("surface terms") {
  CHECK(Term{"cat", 2}.surface() == "not not cat");
  CHECK(Term::parse("not not cat") == Term{"cat", 2});
  CHECK(Term::parse("cat") == Term{"cat", 0});
  CHECK(parse_relation("hypernym") == Relation::hypernym);
  CHECK_THROWS_AS(parse_relation("antonym"), DataError);
}

TEST_CASE("expand_once") {
  const auto out = expand_once({base_pair("p", "q", Relation::equal)});
  REQUIRE(out.size() == 3);
  CHECK(out[0].premise == Term{"p", 1});
  CHECK(out[0].hypothesis == Term{"q", 1});
  CHECK(out[0].relation == Relation::equal);
  CHECK(out[1].premise == Term{"p", 0});
  CHECK(out[1].hypothesis == Term{"q", 1});
  CHECK(out[1].relation == Relation::disjoint);
  CHECK(out[2].premise == Term{"p", 1});
  CHECK(out[2].hypothesis == Term{"q", 0});
  CHECK(out[2].relation == Relation::disjoint);

  const auto level2 = expand_once(out);
  CHECK(level2.size() == 9);
  std::set<std::string> derivations{""};
  for (const auto& e : out) derivations.insert(e.derivation);
  for (const auto& e : level2) derivations.insert(e.derivation);
  CHECK(derivations.size() == 13);
  for (const auto& e : level2) CHECK(replay_relation(e) == e.relation);
}

TEST_CASE("apportion") {
  const auto q = apportion({{Relation::neutral, 50}, {Relation::hypernym, 25}, {Relation::hyponym, 25}}, 100);
  CHECK(q.at(Relation::neutral) == 50);
  CHECK(q.at(Relation::hypernym) == 25);
  CHECK(q.at(Relation::hyponym) == 25);
  const auto r = apportion({{Relation::hypernym, 1}, {Relation::hyponym, 1}, {Relation::equal, 1}}, 10);
  CHECK(r.at(Relation::hypernym) == 4);
  CHECK(r.at(Relation::hyponym) == 3);
  CHECK(r.at(Relation::equal) == 3);
}

TEST_CASE("generate_dataset") {
  Quiet quiet;
  const std::vector<NegExample> base{base_pair("cat", "animal", Relation::hyponym),
                                     base_pair("dog", "cat", Relation::disjoint),
                                     base_pair("sofa", "couch", Relation::equal)};
  NegationConfig cfg;
  cfg.downsample_to = 0;
  const auto ds = generate_dataset(base, cfg);
  CHECK(ds.train_stats.derivations == 13 * base.size());
  std::set<std::pair<std::string, std::string>> train;
  for (const auto& e : ds.train) {
    CHECK(replay_relation(e) == e.relation);
    CHECK(e.level() <= 2);
    train.emplace(e.premise.surface(), e.hypothesis.surface());
  }
  CHECK(train.size() == ds.train.size());
  for (const auto& [depth, set] : ds.tests) {
    CHECK(!set.empty());
    for (const auto& e : set) {
      CHECK(e.level() == depth);
      CHECK(replay_relation(e) == e.relation);
      CHECK(!train.contains({e.premise.surface(), e.hypothesis.surface()}));
    }
  }

  cfg.conflicts = ConflictPolicy::abort;
  CHECK_THROWS_AS(generate_dataset(base, cfg), DataError);

  cfg.conflicts = ConflictPolicy::drop;
  cfg.test_depths = {2};
  CHECK_THROWS_AS(generate_dataset(base, cfg), UsageError);
}

TEST_CASE("downsampling follows the train label mix and is seeded") {
  Quiet quiet;
  std::vector<NegExample> base;
  for (int i = 0; i < 40; ++i)
    base.push_back(base_pair("a" + std::to_string(i), "b" + std::to_string(i),
                             i % 2 ? Relation::hyponym : Relation::disjoint));
  NegationConfig cfg;
  cfg.downsample_to = 60;
  cfg.seed = 4;
  const auto a = generate_dataset(base, cfg);
  const auto b = generate_dataset(base, cfg);
  for (const auto& [depth, set] : a.tests) {
    CHECK(set.size() <= 60);
    REQUIRE(set.size() == b.tests.at(depth).size());
    for (std::size_t i = 0; i < set.size(); ++i) CHECK(set[i].premise == b.tests.at(depth)[i].premise);
  }
}

TEST_CASE("set semantics oracle") {
  Denotations d{4, {{"p", subset(4, {0})}, {"q", subset(4, {0, 1})}, {"r", subset(4, {1})}}};
  CHECK(set_semantics_oracle(d, {"p", 0}, {"q", 0}) == Relation::hyponym);
  CHECK(set_semantics_oracle(d, {"p", 0}, {"r", 0}) == Relation::disjoint);
  CHECK(set_semantics_oracle(d, {"p", 1}, {"r", 1}) == Relation::neutral);
  CHECK(set_semantics_oracle(d, {"p", 1}, {"r", 1}) == negate_relation(Relation::disjoint, true, true));

  Denotations cover{2, {{"p", subset(2, {0})}, {"q", subset(2, {1})}}};
  CHECK_THROWS_AS(set_semantics_oracle(cover, {"p", 0}, {"q", 0}), DataError);
  Denotations empty{2, {{"p", subset(2, {})}, {"q", subset(2, {1})}}};
  CHECK_THROWS_AS(set_semantics_oracle(empty, {"p", 0}, {"q", 0}), DataError);
}

TEST_CASE("TSV round-trip") {
  std::vector<NegExample> xs{base_pair("cat", "animal", Relation::hyponym)};
  xs.push_back(expand_once(xs)[0]);
  std::stringstream buf;
  write_negation_tsv(buf, xs);
  CHECK(buf.str() == "cat\tanimal\thyponym\nnot cat\tnot animal\thypernym\n");
  const auto back = read_negation_tsv(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[1].premise == Term{"cat", 1});
  CHECK(back[1].relation == Relation::hypernym);

  std::istringstream bad("cat\tanimal\n");
  CHECK_THROWS_WITH_AS(read_negation_tsv(bad), doctest::Contains("line 1"), DataError);
}
