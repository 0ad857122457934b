#ifndef GEOPROBE_ANALYSIS_H_
#define GEOPROBE_ANALYSIS_H_

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "geoprobe/error.h"

namespace geoprobe {

// ---------------------------------------------------------------------------
// Emergence curves: s(x) = a + (b - a) / (1 + exp(-(x - mu) / sigma)) with
// x = log10(cumulative words).

struct CurvePoint {
  double words = 0;
  double score = 0;
};

struct LogisticParams {
  double floor = 0;     // a
  double ceiling = 0;   // b
  double midpoint = 0;  // mu, log10 words
  double slope = 1;     // sigma

  double operator()(double log_words) const;
};

struct EmergenceCurve {
  std::vector<CurvePoint> points;
  bool degenerate = false;  // flat data; params meaningless
  LogisticParams params;
  double residual = 0;      // sum of squared errors
  double min_log_words = 0;
  double max_log_words = 0;

  double Evaluate(double words) const { return params(std::log10(words)); }
};

struct FitOptions {
  uint64_t seed = 0;
  int random_starts = 24;
  double flat_tolerance = 1e-9;  // score range (or b - a) below this is degenerate
};

EmergenceCurve FitEmergence(std::vector<CurvePoint> points, const FitOptions& options = {});

// Nelder-Mead minimisation; exposed for tests.
struct SimplexResult {
  std::vector<double> x;
  double value = 0;
  int iterations = 0;
};
SimplexResult NelderMead(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> start, std::vector<double> step,
                         int max_iterations = 4000, double tolerance = 1e-12);

// (s(x) - min s) / (max s - min s), min/max over the given grid.
std::vector<double> RelativeScores(const EmergenceCurve& curve, const std::vector<double>& log_words);

struct EmergencePoint {
  double words = 0;
  bool extrapolated = false;  // outside the observed checkpoint range
};

// Words at which (s - a) / (b - a) reaches `level`.
EmergencePoint EmergencePointAt(const EmergenceCurve& curve, double level = 0.5);

// log10(model_words / human_words).
double DataGap(double model_words, double human_words);

// ---------------------------------------------------------------------------
// Subspace and unit analyses.

// Orthonormal basis of the column space (left singular vectors with
// singular value above tolerance * largest).
Eigen::MatrixXd ColumnBasis(const Eigen::MatrixXd& probe, double tolerance = 1e-10);

// ||V1^T V2||_F^2 / min(rank1, rank2): the mean squared cosine of the
// principal angles.
double SubspaceAlignment(const Eigen::MatrixXd& first, const Eigen::MatrixXd& second);

struct UnitNorms {
  Eigen::VectorXd norms;  // one per input unit (probe row)
  double median = 0;
  std::vector<int> outliers;  // norm >= factor * median
};

UnitNorms ProbeUnitNorms(const Eigen::MatrixXd& probe, double factor = 2.0);

// Units flagged in both.
std::vector<int> JointOutliers(const UnitNorms& first, const UnitNorms& second);

// Layers whose score reaches `fraction` of the best score.
std::vector<int> SelectLayers(const std::vector<double>& scores, double fraction = 0.8);

// ---------------------------------------------------------------------------
// Ridge encoding models.

struct RidgeFit {
  Eigen::VectorXd coefficients;
  double intercept = 0;
  Eigen::RowVectorXd feature_means;
};

// Centred ridge regression: minimises ||y - c - Xb||^2 + penalty ||b||^2.
RidgeFit FitRidge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double penalty);

// Contiguous blocks [begin, end) covering 0..n-1.
std::vector<std::pair<int, int>> SequentialFolds(int n, int folds);

struct RidgeOptions {
  int outer_folds = 5;
  int inner_folds = 5;
  std::vector<double> penalties = {1e-3, 1e-2, 1e-1, 1, 10, 100, 1000};
};

struct CrossValidatedRidge {
  double r2 = 0;                     // pooled held-out 1 - SSE/SST
  std::vector<double> penalties;     // chosen per outer fold
  Eigen::VectorXd predictions;       // held-out predictions
  std::vector<RidgeFit> fits;        // per outer fold
  std::vector<std::pair<int, int>> folds;
};

CrossValidatedRidge RidgeNestedCv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  const RidgeOptions& options = {});

struct VariancePartition {
  double r2_total = 0;
  double r2_semantic = 0;
  double r2_syntax = 0;
  double cross_term = 0;  // r2_total - (r2_semantic + r2_syntax)
};

// cov(y, yhat_block) / var(y) for each block, plus 1 - SSE/SST for the sum.
VariancePartition PartitionPredictions(const Eigen::VectorXd& y, const Eigen::VectorXd& semantic_part,
                                       const Eigen::VectorXd& syntax_part,
                                       const Eigen::VectorXd& intercepts);

// Joint nested-CV fit on [X_sem | X_syn], held-out predictions split by
// coefficient block.
VariancePartition PartitionVariance(const Eigen::MatrixXd& semantic, const Eigen::MatrixXd& syntax,
                                    const Eigen::VectorXd& y, const RidgeOptions& options = {});

struct IncrementalR2 {
  double r2_univariate = 0;
  double r2_joint = 0;
  double delta = 0;
};

IncrementalR2 IncrementalRSquared(const Eigen::MatrixXd& univariate, const Eigen::MatrixXd& subspace,
                                  const Eigen::VectorXd& y, const RidgeOptions& options = {});

}  // namespace geoprobe

#endif  // GEOPROBE_ANALYSIS_H_
