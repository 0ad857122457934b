#ifndef GEOPROBE_DATASET_H_
#define GEOPROBE_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "geoprobe/gold.h"

namespace geoprobe {

struct Lexicon {
  std::map<std::string, std::vector<std::string>> synsets;  // synset -> lemmas
  std::map<std::string, double> frequencies;                // lemma -> score
  std::shared_ptr<const SemanticGraph> graph;  // hyponym links; null = all leaves

  void Validate() const;
};

// {"synsets": {"dog.n.01": ["dog", "domestic dog"], ...},
//  "frequencies": {"dog": 5.2, ...}}
Lexicon ParseLexicon(const std::string& json_text,
                     std::shared_ptr<const SemanticGraph> graph);
Lexicon ReadLexicon(const std::filesystem::path& path,
                    std::shared_ptr<const SemanticGraph> graph);

using SynsetLemma = std::pair<std::string, std::string>;

struct UnisemicResult {
  std::vector<SynsetLemma> pairs;           // sorted by synset
  std::vector<std::string> pruned_leaves;   // polysemic leaves removed
  std::vector<std::string> dropped;         // left without a unique lemma
};

// Gives each synset the most frequent lemma that no other synset claims.
// Synsets holding a unique lemma release their shared ones, which can make
// those unique elsewhere; this repeats to a fixpoint, then leaf synsets whose
// lemmas are all shared are pruned and the fixpoint is rerun.
UnisemicResult UnisemicWordlist(const Lexicon& lexicon);

// Keeps pairs whose every whitespace-separated word is allowed.
std::vector<SynsetLemma> FilterVocabulary(const std::vector<SynsetLemma>& pairs,
                                          const std::set<std::string>& allowed);

// One line per word; blank lines ignored.
std::set<std::string> ReadVocabulary(const std::filesystem::path& path);

// Categories are lists of element indices.
using CategoryList = std::vector<std::vector<int>>;

// sum_j (t_j - f |C_j|)^2 with t_j the number of test members of C_j.
double SplitCost(const std::vector<uint8_t>& in_test, const CategoryList& categories,
                 double test_fraction);

// Metropolis rule: downhill moves always, otherwise u < exp(-delta / T).
bool AcceptMove(double delta, double temperature, double uniform01);

struct AnnealingOptions {
  double test_fraction = 0.2;
  int64_t iterations = 1'000'000;
  double cooling = 0.999995;
  double initial_temperature = 1.0;
  uint64_t seed = 0;
  int64_t trace_every = 100'000;
};

struct SplitAssignment {
  std::vector<uint8_t> in_test;  // one flag per element
  double test_fraction = 0.2;
  double initial_cost = 0;
  double cost = 0;
  std::vector<double> category_fraction;  // achieved test share per category
  std::vector<std::pair<int64_t, double>> cost_trace;  // (iteration, cost)

  int test_count() const;
};

// Single-element flips under geometric cooling, starting from independent
// Bernoulli(test_fraction) labels.
SplitAssignment SaSplit(int element_count, const CategoryList& categories,
                        const AnnealingOptions& options);

// Hyponym closures of every graph node, restricted to `elements` and kept
// when they have at least `min_size` members; identical sets are merged.
// Returns (category root, member indices) sorted by root name.
std::vector<std::pair<std::string, std::vector<int>>> BuildCategories(
    const SemanticGraph& graph, const std::vector<std::string>& elements, int min_size);

}  // namespace geoprobe

#endif  // GEOPROBE_DATASET_H_
