#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "geoprobe/analysis.h"

namespace geoprobe {

Eigen::MatrixXd ColumnBasis(const Eigen::MatrixXd& probe, double tolerance) {
  if (probe.size() == 0) throw InvalidArgument("empty probe matrix");
  if (!probe.allFinite()) throw InvalidArgument("probe matrix has non-finite entries");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(probe, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0)) throw InvalidArgument("probe matrix has rank zero");
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tolerance * sv(0)) ++rank;
  return svd.matrixU().leftCols(rank);
}

double SubspaceAlignment(const Eigen::MatrixXd& first, const Eigen::MatrixXd& second) {
  if (first.rows() != second.rows())
    throw InvalidArgument("probes act on different spaces: " + std::to_string(first.rows()) + " vs " +
                          std::to_string(second.rows()) + " rows");
  const Eigen::MatrixXd v1 = ColumnBasis(first);
  const Eigen::MatrixXd v2 = ColumnBasis(second);
  const double overlap = (v1.transpose() * v2).squaredNorm();
  const double rank = static_cast<double>(std::min(v1.cols(), v2.cols()));
  return std::clamp(overlap / rank, 0.0, 1.0);
}

UnitNorms ProbeUnitNorms(const Eigen::MatrixXd& probe, double factor) {
  if (probe.rows() == 0) throw InvalidArgument("empty probe matrix");
  UnitNorms out;
  out.norms = probe.rowwise().norm();
  std::vector<double> sorted(out.norms.data(), out.norms.data() + out.norms.size());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  out.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  if (!(out.median > 0)) return out;
  for (int i = 0; i < out.norms.size(); ++i)
    if (out.norms(i) >= factor * out.median) out.outliers.push_back(i);
  return out;
}

std::vector<int> JointOutliers(const UnitNorms& first, const UnitNorms& second) {
  std::vector<int> out;
  std::set_intersection(first.outliers.begin(), first.outliers.end(), second.outliers.begin(),
                        second.outliers.end(), std::back_inserter(out));
  return out;
}

std::vector<int> SelectLayers(const std::vector<double>& scores, double fraction) {
  if (scores.empty()) return {};
  const double best = *std::max_element(scores.begin(), scores.end());
  std::vector<int> out;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool keep = best > 0 ? scores[i] >= fraction * best : scores[i] == best;
    if (keep) out.push_back(static_cast<int>(i));
  }
  return out;
}

RidgeFit FitRidge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double penalty) {
  if (x.rows() != y.size()) throw InvalidArgument("ridge: row count mismatch");
  if (x.rows() == 0) throw InvalidArgument("ridge: no samples");
  if (penalty < 0) throw InvalidArgument("ridge: negative penalty");
  RidgeFit fit;
  fit.feature_means = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - fit.feature_means;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += penalty;
  const Eigen::VectorXd rhs = xc.transpose() * (y.array() - y_mean).matrix();
  fit.coefficients = gram.ldlt().solve(rhs);
  fit.intercept = y_mean - fit.feature_means.dot(fit.coefficients);
  return fit;
}

std::vector<std::pair<int, int>> SequentialFolds(int n, int folds) {
  if (folds < 2 || n < folds)
    throw InvalidArgument("cannot split " + std::to_string(n) + " samples into " + std::to_string(folds) +
                          " folds");
  std::vector<std::pair<int, int>> out;
  for (int f = 0; f < folds; ++f) {
    const int begin = static_cast<int>(static_cast<int64_t>(n) * f / folds);
    const int end = static_cast<int>(static_cast<int64_t>(n) * (f + 1) / folds);
    out.emplace_back(begin, end);
  }
  return out;
}

namespace {

Eigen::MatrixXd TakeRows(const Eigen::MatrixXd& x, const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), x.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = x.row(rows[i]);
  return out;
}

Eigen::VectorXd TakeRows(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  Eigen::VectorXd out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out(i) = y(rows[i]);
  return out;
}

std::vector<int> Complement(int n, std::pair<int, int> fold) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (i < fold.first || i >= fold.second) out.push_back(i);
  return out;
}

double Predict(const RidgeFit& fit, const Eigen::RowVectorXd& row) {
  return fit.intercept + row.dot(fit.coefficients);
}

double ChoosePenalty(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options) {
  const int n = static_cast<int>(x.rows());
  const auto folds = SequentialFolds(n, options.inner_folds);
  double best_penalty = options.penalties.front();
  double best_sse = std::numeric_limits<double>::infinity();
  for (double penalty : options.penalties) {
    double sse = 0;
    for (const auto& fold : folds) {
      const auto train = Complement(n, fold);
      const RidgeFit fit = FitRidge(TakeRows(x, train), TakeRows(y, train), penalty);
      for (int i = fold.first; i < fold.second; ++i) {
        const double r = y(i) - Predict(fit, x.row(i));
        sse += r * r;
      }
    }
    if (sse < best_sse) {
      best_sse = sse;
      best_penalty = penalty;
    }
  }
  return best_penalty;
}

double PooledR2(const Eigen::VectorXd& y, const Eigen::VectorXd& predictions) {
  const double sst = (y.array() - y.mean()).square().sum();
  if (!(sst > 0)) throw InvalidArgument("response has zero variance");
  return 1.0 - (y - predictions).squaredNorm() / sst;
}

}  // namespace

CrossValidatedRidge RidgeNestedCv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  const RidgeOptions& options) {
  if (x.rows() != y.size()) throw InvalidArgument("ridge: row count mismatch");
  if (options.penalties.empty()) throw InvalidArgument("ridge: no penalties to search");
  const int n = static_cast<int>(x.rows());
  if (n < options.outer_folds * options.inner_folds)
    throw InvalidArgument("nested cross-validation needs at least " +
                          std::to_string(options.outer_folds * options.inner_folds) + " samples, got " +
                          std::to_string(n));
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("ridge inputs contain non-finite values");

  CrossValidatedRidge out;
  out.folds = SequentialFolds(n, options.outer_folds);
  out.predictions = Eigen::VectorXd::Zero(n);
  for (const auto& fold : out.folds) {
    const auto train = Complement(n, fold);
    const Eigen::MatrixXd x_train = TakeRows(x, train);
    const Eigen::VectorXd y_train = TakeRows(y, train);
    const double penalty = ChoosePenalty(x_train, y_train, options);
    RidgeFit fit = FitRidge(x_train, y_train, penalty);
    for (int i = fold.first; i < fold.second; ++i) out.predictions(i) = Predict(fit, x.row(i));
    out.penalties.push_back(penalty);
    out.fits.push_back(std::move(fit));
  }
  out.r2 = PooledR2(y, out.predictions);
  return out;
}

VariancePartition PartitionPredictions(const Eigen::VectorXd& y, const Eigen::VectorXd& semantic_part,
                                       const Eigen::VectorXd& syntax_part,
                                       const Eigen::VectorXd& intercepts) {
  const auto n = y.size();
  if (semantic_part.size() != n || syntax_part.size() != n || intercepts.size() != n)
    throw InvalidArgument("partition: length mismatch");
  const Eigen::ArrayXd yc = y.array() - y.mean();
  const double var = yc.square().mean();
  if (!(var > 0)) throw InvalidArgument("response has zero variance");
  auto explained = [&](const Eigen::VectorXd& part) {
    const Eigen::ArrayXd pc = part.array() - part.mean();
    return (yc * pc).mean() / var;
  };
  VariancePartition out;
  out.r2_total = PooledR2(y, semantic_part + syntax_part + intercepts);
  out.r2_semantic = explained(semantic_part);
  out.r2_syntax = explained(syntax_part);
  out.cross_term = out.r2_total - (out.r2_semantic + out.r2_syntax);
  return out;
}

VariancePartition PartitionVariance(const Eigen::MatrixXd& semantic, const Eigen::MatrixXd& syntax,
                                    const Eigen::VectorXd& y, const RidgeOptions& options) {
  if (semantic.rows() != syntax.rows()) throw InvalidArgument("partition: feature blocks differ in rows");
  const int n = static_cast<int>(semantic.rows());
  const int p = static_cast<int>(semantic.cols());
  Eigen::MatrixXd joint(n, p + syntax.cols());
  joint << semantic, syntax;
  const CrossValidatedRidge cv = RidgeNestedCv(joint, y, options);

  Eigen::VectorXd sem(n), syn(n), icpt(n);
  for (size_t f = 0; f < cv.folds.size(); ++f) {
    const RidgeFit& fit = cv.fits[f];
    for (int i = cv.folds[f].first; i < cv.folds[f].second; ++i) {
      const Eigen::RowVectorXd centred = joint.row(i) - fit.feature_means;
      sem(i) = centred.head(p).dot(fit.coefficients.head(p));
      syn(i) = centred.tail(syntax.cols()).dot(fit.coefficients.tail(syntax.cols()));
      icpt(i) = fit.intercept + fit.feature_means.dot(fit.coefficients);
    }
  }
  return PartitionPredictions(y, sem, syn, icpt);
}

IncrementalR2 IncrementalRSquared(const Eigen::MatrixXd& univariate, const Eigen::MatrixXd& subspace,
                                  const Eigen::VectorXd& y, const RidgeOptions& options) {
  if (univariate.rows() != subspace.rows()) throw InvalidArgument("incremental R2: row count mismatch");
  Eigen::MatrixXd joint(univariate.rows(), univariate.cols() + subspace.cols());
  joint << univariate, subspace;
  IncrementalR2 out;
  out.r2_univariate = RidgeNestedCv(univariate, y, options).r2;
  out.r2_joint = RidgeNestedCv(joint, y, options).r2;
  out.delta = out.r2_joint - out.r2_univariate;
  return out;
}

}  // namespace geoprobe
