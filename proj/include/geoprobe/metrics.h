#ifndef GEOPROBE_METRICS_H_
#define GEOPROBE_METRICS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "geoprobe/gold.h"

namespace geoprobe {

class Rng;

// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> AverageRanks(std::span<const double> values);

double Pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks. Throws InvalidArgument on length
// mismatch, fewer than two values, or a constant side.
double Spearman(std::span<const double> x, std::span<const double> y);

// Squared Euclidean distances between the rows of `points`.
Eigen::MatrixXd SquaredDistances(const Eigen::MatrixXd& points);

struct EvalReport {
  std::string metric;
  std::string grouping;
  std::vector<std::string> group_ids;
  std::vector<double> group_scores;
  std::string aggregate_kind = "mean";  // or "median"
  std::optional<double> aggregate;      // empty when no group was scorable
  int element_count = 0;
  int excluded_groups = 0;  // constant predictions or gold, too few elements
  std::string probe_id;
  int layer = -1;
  std::optional<int64_t> checkpoint_words;

  // Mean or median of group_scores.
  std::optional<double> Recompute() const;
  nlohmann::json ToJson() const;
  // "group,score" rows.
  std::string ToCsv() const;
};

struct EvalOptions {
  int set_size = 0;             // pooled structures; 0 picks the kind's default
  int min_group_size = 3;       // sentences shorter than this are skipped
  uint64_t seed = 0;            // order of pooled evaluation sets
};

// Evaluation set size matching the training batch shapes.
int DefaultEvalSetSize(StructureKind kind);

// Evaluation groups: sentences for syntax, seeded chunks of `elements` for
// pooled structures. Groups are lists of gold element indices.
std::vector<std::pair<std::string, std::vector<int>>> EvaluationGroups(
    const GoldStructure& gold, const std::vector<int>& elements, const EvalOptions& options);

// Spearman between gold distances and squared projected distances over all
// defined pairs of each group, averaged across groups. `h` rows follow the
// gold element order.
EvalReport EvalDistanceProbe(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                             const GoldStructure& gold, const std::vector<int>& elements,
                             const EvalOptions& options = {});

// Spanning tree of minimum total weight; ties broken by the lexicographically
// smallest (i, j) edge. Throws on asymmetric input.
std::vector<Edge> MinimumSpanningTree(const Eigen::MatrixXd& distances);

// Fraction of the sentence's gold edges present in `predicted`, direction
// ignored.
double Uuas(const std::vector<Edge>& predicted, const DependencySentence& sentence);
double Uuas(const std::vector<Edge>& predicted, const std::vector<Edge>& gold);

// Per-sentence UUAS of the MST over projected distances, mean across
// sentences. Gold edges are the structure's adjacencies.
EvalReport EvalUuas(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                    const GoldStructure& gold, const std::vector<int>& elements);

struct RankScoreResult {
  std::vector<std::optional<double>> node_scores;  // nullopt: no positives
  std::optional<double> median;
  int skipped = 0;
};

// For each node, other nodes sorted by increasing distance get ranks
// 1..n-1 (ties averaged); the node's score is the mean rank of its positives.
RankScoreResult RankScore(const Eigen::MatrixXd& distances,
                          const std::vector<std::vector<int>>& positives);

// Rank score over projected distances: per sentence for syntax, over all
// evaluated elements otherwise. Aggregate is the median over nodes.
EvalReport EvalRankScore(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                         const GoldStructure& gold, const std::vector<int>& elements);

struct CategoryF1 {
  double f1 = 0;
  double precision = 0;
  double recall = 0;
  int true_positives = 0;
  int predicted_positives = 0;
  int actual_positives = 0;
};

// k-nearest-neighbour membership test for each category: a test element is
// predicted in C when at least ceil(k/2) of its k nearest training elements
// (Euclidean, ties by element id) are members. `categories` hold element
// indices into `embeddings` rows.
std::vector<CategoryF1> KnnF1(const Eigen::MatrixXd& embeddings,
                              const std::vector<std::string>& element_ids,
                              const std::vector<int>& train, const std::vector<int>& test,
                              const std::vector<std::vector<int>>& categories, int k = 5);

struct LinearControlResult {
  EvalReport versus_gold;
  EvalReport versus_linear;
};

// Same projected distances scored against dependency trees and against the
// surface-order chain. `h` rows follow MakeSyntaxGold(sentences) order.
LinearControlResult LinearTreeControl(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                                      const std::vector<DependencySentence>& sentences,
                                      const std::vector<int>& elements);

// One mean row per category. Throws on an empty category.
Eigen::MatrixXd CategoryCentroids(const Eigen::MatrixXd& embeddings,
                                  const std::vector<std::vector<int>>& categories);

struct NullBand {
  double mean = 0;
  double stddev = 0;
  double lower = 0;  // 2.5% quantile
  double upper = 0;  // 97.5% quantile
};

// Monte-Carlo distribution of a scalar statistic under a null sampler.
NullBand MonteCarloNull(const std::function<double(Rng&)>& sample, int trials, uint64_t seed);

}  // namespace geoprobe

#endif  // GEOPROBE_METRICS_H_
