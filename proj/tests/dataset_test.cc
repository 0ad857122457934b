#include <algorithm>
#include <cmath>
#include <limits>

#include <doctest.h>

#include "geoprobe/dataset.h"

namespace geoprobe {
namespace {

Lexicon ToyLexicon() {
  auto graph = std::make_shared<SemanticGraph>(SemanticGraph::FromEdges({
      {"dog.n.01", "canine.n.01"},
      {"canine.n.01", "animal.n.01"},
      {"bank.n.01", "place.n.01"},
      {"bank.n.02", "place.n.01"},
  }));
  return ParseLexicon(R"({
    "synsets": {
      "animal.n.01": ["animal", "animate_being", "beast"],
      "beast.n.02": ["beast"],
      "canine.n.01": ["canine", "canid", "dog"],
      "dog.n.01": ["dog", "domestic_dog"],
      "frump.n.01": ["dog", "frump"],
      "bank.n.01": ["bank"],
      "bank.n.02": ["bank"],
      "place.n.01": ["place", "bank"]
    },
    "frequencies": {"canid": 5, "canine": 3, "dog": 100, "bank": 50}
  })",
                      graph);
}

// Traced by hand: synsets owning a unique lemma drop shared ones, which frees
// "beast" for beast.n.02; both bank leaves stay polysemic and are pruned.
TEST_CASE("unisemic wordlist on a toy lexicon") {
  const UnisemicResult r = UnisemicWordlist(ToyLexicon());
  const std::vector<SynsetLemma> expected = {
      {"animal.n.01", "animal"},  // tie at frequency 0 -> smallest lemma
      {"beast.n.02", "beast"},
      {"canine.n.01", "canid"},   // most frequent unique lemma
      {"dog.n.01", "domestic_dog"},
      {"frump.n.01", "frump"},
      {"place.n.01", "place"},
  };
  CHECK(r.pairs == expected);
  CHECK(r.pruned_leaves == std::vector<std::string>{"bank.n.01", "bank.n.02"});
  CHECK(r.dropped.empty());
  // Every chosen lemma is used once.
  std::set<std::string> lemmas;
  for (const auto& p : r.pairs) lemmas.insert(p.second);
  CHECK(lemmas.size() == r.pairs.size());
}

TEST_CASE("vocabulary filter needs every word") {
  const std::vector<SynsetLemma> pairs = {{"a", "ice cream"}, {"b", "ice"}, {"c", "sorbet"}};
  const auto kept = FilterVocabulary(pairs, {"ice", "cream"});
  CHECK(kept == std::vector<SynsetLemma>{{"a", "ice cream"}, {"b", "ice"}});
}

TEST_CASE("split cost and acceptance rule") {
  const CategoryList cats = {{0, 1, 2, 3, 4}, {0, 1}};
  CHECK(SplitCost({1, 0, 0, 0, 0}, cats, 0.2) == doctest::Approx(0.0 + 0.6 * 0.6));
  CHECK(AcceptMove(-1.0, 0.0, 0.99));
  CHECK(AcceptMove(0.0, 1.0, 0.99));
  CHECK(AcceptMove(1.0, 1.0, std::exp(-1.0) - 1e-9));
  CHECK_FALSE(AcceptMove(1.0, 1.0, std::exp(-1.0) + 1e-9));
  CHECK_FALSE(AcceptMove(1.0, 0.0, 0.0));
}

// The 00100 state (cost 0.72) is a single-flip local minimum separated from
// the optimum 00001 (0.52) by a barrier of 1.0, so annealing finds the optimum
// often but not always.
TEST_CASE("annealing against the enumerated optimum on five elements") {
  const CategoryList cats = {{0, 1, 2, 3, 4}, {0, 1}, {2, 3, 4}, {1, 2}, {3}};
  std::vector<double> cost_of(32);
  for (int mask = 0; mask < 32; ++mask) {
    std::vector<uint8_t> labels(5);
    for (int i = 0; i < 5; ++i) labels[i] = (mask >> i) & 1;
    cost_of[mask] = SplitCost(labels, cats, 0.2);
  }
  const double best = *std::min_element(cost_of.begin(), cost_of.end());
  CHECK(best == doctest::Approx(0.52));
  int optimal = 0;
  const int seeds = 10;
  for (int seed = 0; seed < seeds; ++seed) {
    AnnealingOptions opts;
    opts.seed = seed;
    const SplitAssignment s = SaSplit(5, cats, opts);
    int mask = 0;
    for (int i = 0; i < 5; ++i) mask |= s.in_test[i] << i;
    CHECK(s.cost == doctest::Approx(cost_of[mask]).epsilon(1e-12));
    for (int i = 0; i < 5; ++i) CHECK(cost_of[mask ^ (1 << i)] >= s.cost);
    optimal += std::abs(s.cost - best) < 1e-12;
  }
  CHECK(optimal > seeds / 2);
}

TEST_CASE("annealing is deterministic and reports category fractions") {
  CategoryList cats;
  for (int c = 0; c < 10; ++c) {
    std::vector<int> members;
    for (int i = c * 10; i < c * 10 + 20 && i < 100; ++i) members.push_back(i);
    cats.push_back(members);
  }
  AnnealingOptions opts;
  opts.iterations = 50000;
  opts.seed = 3;
  opts.trace_every = 10000;
  const SplitAssignment a = SaSplit(100, cats, opts);
  const SplitAssignment b = SaSplit(100, cats, opts);
  CHECK(a.in_test == b.in_test);
  CHECK(a.cost_trace.size() == 6);
  CHECK(a.cost <= a.initial_cost);
  for (size_t j = 0; j < cats.size(); ++j) {
    int t = 0;
    for (int m : cats[j]) t += a.in_test[m];
    CHECK(a.category_fraction[j] == doctest::Approx(static_cast<double>(t) / cats[j].size()));
  }
  opts.test_fraction = 1.5;
  CHECK_THROWS_AS(SaSplit(100, cats, opts), InvalidArgument);
}

TEST_CASE("categories are hyponym closures over the element list") {
  const auto g = SemanticGraph::FromEdges(
      {{"a", "root"}, {"b", "root"}, {"c", "mid"}, {"d", "mid"}, {"mid", "root"}, {"e", "solo"}});
  const auto cats = BuildCategories(g, {"a", "b", "c", "d", "e", "mid"}, 2);
  REQUIRE(cats.size() == 2);
  CHECK(cats[0].first == "mid");
  CHECK(cats[0].second == std::vector<int>{2, 3, 5});
  CHECK(cats[1].first == "root");
  CHECK(cats[1].second.size() == 5);
}

}  // namespace
}  // namespace geoprobe
