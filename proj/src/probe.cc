#include "geoprobe/probe.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "geoprobe/random.h"

namespace geoprobe {

std::string ToString(Objective objective) {
  return objective == Objective::kDistance ? "distance" : "contrastive";
}

Objective ParseObjective(const std::string& name) {
  if (name == "distance") return Objective::kDistance;
  if (name == "contrastive") return Objective::kContrastive;
  throw InvalidArgument("unknown objective '" + name + "' (distance, contrastive)");
}

void TrainConfig::Validate() const {
  if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be positive");
  if (probe_dim < 1) throw InvalidArgument("probe_dim must be at least 1");
  if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (!(init_scale >= 0)) throw InvalidArgument("init_scale must be nonnegative");
  if (sets_per_batch < 1) throw InvalidArgument("sets_per_batch must be at least 1");
  if (set_size < 0 || set_size == 1) throw InvalidArgument("set_size must be 0 or >= 2");
  if (negatives_per_anchor < 1) throw InvalidArgument("negatives_per_anchor must be >= 1");
}

TrainConfig TrainConfig::Preset(StructureKind kind, Objective objective) {
  TrainConfig c;
  c.objective = objective;
  switch (kind) {
    case StructureKind::kPhoneme:
      c.learning_rate = 1e-5;
      c.probe_dim = 768;
      c.epochs = 100;
      c.sets_per_batch = 1;
      c.set_size = 200;
      break;
    case StructureKind::kSemantic:
      c.learning_rate = 7.5e-6;
      c.probe_dim = 200;
      c.epochs = objective == Objective::kContrastive ? 1000 : 200;
      c.sets_per_batch = 300;
      c.set_size = 12;
      break;
    case StructureKind::kSyntax:
      c.learning_rate = 1e-5;
      c.probe_dim = 200;
      c.epochs = 2;
      c.sets_per_batch = 300;
      c.set_size = 0;
      break;
  }
  return c;
}

nlohmann::json ToJson(const TrainConfig& c) {
  return {
      {"learning_rate", c.learning_rate},
      {"probe_dim", c.probe_dim},
      {"epochs", c.epochs},
      {"init_scale", c.init_scale},
      {"sets_per_batch", c.sets_per_batch},
      {"set_size", c.set_size},
      {"seed", c.seed},
      {"objective", ToString(c.objective)},
      {"negatives_per_anchor", c.negatives_per_anchor},
  };
}

TrainConfig TrainConfigFromJson(const nlohmann::json& j, TrainConfig c) {
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.probe_dim = j.value("probe_dim", c.probe_dim);
    c.epochs = j.value("epochs", c.epochs);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.sets_per_batch = j.value("sets_per_batch", c.sets_per_batch);
    c.set_size = j.value("set_size", c.set_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("objective")) c.objective = ParseObjective(j["objective"].get<std::string>());
    c.negatives_per_anchor = j.value("negatives_per_anchor", c.negatives_per_anchor);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("train config: ") + e.what());
  }
  c.Validate();
  return c;
}

Probe InitProbe(int k, int p, uint64_t seed, double scale) {
  if (p < 1 || k < 1) throw InvalidArgument("probe dimensions must be positive");
  if (p > k)
    throw InvalidArgument("probe dimension " + std::to_string(p) +
                          " exceeds activation dimension " + std::to_string(k));
  Rng rng(seed);
  Probe probe;
  probe.weights.resize(k, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < k; ++i) probe.weights(i, j) = rng.Uniform(-scale, scale);
  return probe;
}

Eigen::MatrixXd RandomProbe(int k, int p, uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd w(k, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < k; ++i) w(i, j) = rng.Normal() / std::sqrt(double(k));
  return w;
}

namespace {

// Sum over terms of coeff * (h_a - h_b)(P_a - P_b)^T, P = h B, computed as
// h^T R with R accumulating the projected differences per row.
struct PairwiseTerms {
  std::vector<int> a, b;
  std::vector<double> coeff;
};

Eigen::MatrixXd AccumulateGradient(const Eigen::MatrixXd& h, const Eigen::MatrixXd& projected,
                                   const std::vector<int>& rows, const PairwiseTerms& terms) {
  // rows: global row index of each local row; terms use local indices.
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                            projected.cols());
  for (size_t t = 0; t < terms.coeff.size(); ++t) {
    if (terms.coeff[t] == 0) continue;
    const Eigen::RowVectorXd q =
        terms.coeff[t] * (projected.row(terms.a[t]) - projected.row(terms.b[t]));
    r.row(terms.a[t]) += q;
    r.row(terms.b[t]) -= q;
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(h.cols(), projected.cols());
  for (size_t i = 0; i < rows.size(); ++i)
    grad.noalias() += h.row(rows[i]).transpose() * r.row(static_cast<Eigen::Index>(i));
  return 2.0 * grad;
}

struct LocalRows {
  std::vector<int> rows;
  std::map<int, int> local;

  int Add(int global) {
    auto [it, inserted] = local.emplace(global, static_cast<int>(rows.size()));
    if (inserted) rows.push_back(global);
    return it->second;
  }

  Eigen::MatrixXd Project(const Eigen::MatrixXd& h, const Eigen::MatrixXd& w) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), w.cols());
    for (size_t i = 0; i < rows.size(); ++i)
      out.row(static_cast<Eigen::Index>(i)).noalias() = h.row(rows[i]) * w;
    return out;
  }
};

void CheckPairs(const Eigen::MatrixXd& h, const std::vector<PairTarget>& pairs) {
  if (pairs.empty()) throw InvalidArgument("distance loss needs at least one pair");
  for (const auto& p : pairs)
    if (p.a < 0 || p.b < 0 || p.a >= h.rows() || p.b >= h.rows())
      throw InvalidArgument("pair index out of range");
}

void CheckContrastive(const Eigen::MatrixXd& h, int anchor, const std::vector<int>& positives,
                      const std::vector<int>& negatives) {
  if (positives.empty()) throw InvalidArgument("contrastive loss needs a positive");
  if (negatives.empty()) throw InvalidArgument("contrastive loss needs a negative");
  auto bad = [&](int i) { return i < 0 || i >= h.rows(); };
  if (bad(anchor)) throw InvalidArgument("anchor out of range");
  for (int i : positives)
    if (bad(i) || i == anchor) throw InvalidArgument("invalid positive index");
  for (int i : negatives) {
    if (bad(i) || i == anchor) throw InvalidArgument("invalid negative index");
    if (std::find(positives.begin(), positives.end(), i) != positives.end())
      throw InvalidArgument("positive and negative sets overlap");
  }
}

double LogSumExpNeg(const std::vector<double>& d) {
  const double lo = *std::min_element(d.begin(), d.end());
  double s = 0;
  for (double x : d) s += std::exp(-(x - lo));
  return -lo + std::log(s);
}

}  // namespace

double DistanceLoss(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                    const std::vector<PairTarget>& pairs) {
  CheckPairs(h, pairs);
  double total = 0;
  for (const auto& p : pairs) {
    const double d = ((h.row(p.a) - h.row(p.b)) * weights).squaredNorm();
    total += std::abs(d - p.distance);
  }
  return total / static_cast<double>(pairs.size());
}

Eigen::MatrixXd DistanceLossGradient(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                                     const std::vector<PairTarget>& pairs) {
  CheckPairs(h, pairs);
  LocalRows local;
  PairwiseTerms terms;
  for (const auto& p : pairs) {
    terms.a.push_back(local.Add(p.a));
    terms.b.push_back(local.Add(p.b));
  }
  const Eigen::MatrixXd projected = local.Project(h, weights);
  const double scale = 1.0 / static_cast<double>(pairs.size());
  for (size_t t = 0; t < pairs.size(); ++t) {
    const double r = (projected.row(terms.a[t]) - projected.row(terms.b[t])).squaredNorm() -
                     pairs[t].distance;
    terms.coeff.push_back(r > 0 ? scale : (r < 0 ? -scale : 0.0));
  }
  return AccumulateGradient(h, projected, local.rows, terms);
}

double ContrastiveLoss(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h, int anchor,
                       const std::vector<int>& positives, const std::vector<int>& negatives) {
  CheckContrastive(h, anchor, positives, negatives);
  const Eigen::RowVectorXd pa = h.row(anchor) * weights;
  auto dist = [&](int j) { return (pa - h.row(j) * weights).squaredNorm(); };
  std::vector<double> dp, dn;
  for (int j : positives) dp.push_back(dist(j));
  for (int j : negatives) dn.push_back(dist(j));
  return -LogSumExpNeg(dp) + LogSumExpNeg(dn);
}

Eigen::MatrixXd ContrastiveLossGradient(const Eigen::MatrixXd& weights,
                                        const Eigen::MatrixXd& h, int anchor,
                                        const std::vector<int>& positives,
                                        const std::vector<int>& negatives) {
  CheckContrastive(h, anchor, positives, negatives);
  LocalRows local;
  const int a = local.Add(anchor);
  PairwiseTerms terms;
  for (int j : positives) terms.b.push_back(local.Add(j));
  for (int j : negatives) terms.b.push_back(local.Add(j));
  terms.a.assign(terms.b.size(), a);
  const Eigen::MatrixXd projected = local.Project(h, weights);
  std::vector<double> d(terms.b.size());
  for (size_t t = 0; t < d.size(); ++t)
    d[t] = (projected.row(a) - projected.row(terms.b[t])).squaredNorm();

  // d/dD_j of -log sum_P e^{-D} is the softmax weight w_j; of log sum_N e^{-D}
  // it is -w_k.
  auto softmax = [&](size_t begin, size_t end, double sign) {
    double lo = std::numeric_limits<double>::infinity();
    for (size_t t = begin; t < end; ++t) lo = std::min(lo, d[t]);
    double z = 0;
    for (size_t t = begin; t < end; ++t) z += std::exp(-(d[t] - lo));
    for (size_t t = begin; t < end; ++t) terms.coeff.push_back(sign * std::exp(-(d[t] - lo)) / z);
  };
  softmax(0, positives.size(), 1.0);
  softmax(positives.size(), d.size(), -1.0);
  return AccumulateGradient(h, projected, local.rows, terms);
}

OptimizerState OptimizerState::Zeros(Eigen::Index rows, Eigen::Index cols) {
  OptimizerState s;
  s.first_moment = Eigen::MatrixXd::Zero(rows, cols);
  s.second_moment = Eigen::MatrixXd::Zero(rows, cols);
  s.max_second_moment = Eigen::MatrixXd::Zero(rows, cols);
  return s;
}

void AmsGradStep(OptimizerState& state, Eigen::MatrixXd& weights, const Eigen::MatrixXd& grad,
                 double learning_rate, const AmsGradOptions& options) {
  if (grad.rows() != weights.rows() || grad.cols() != weights.cols() ||
      state.first_moment.rows() != weights.rows() || state.first_moment.cols() != weights.cols())
    throw InvalidArgument("AMSGrad shape mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(options.beta1, t);
  const double bias2 = 1.0 - std::pow(options.beta2, t);
  state.first_moment = options.beta1 * state.first_moment + (1.0 - options.beta1) * grad;
  state.second_moment =
      options.beta2 * state.second_moment + (1.0 - options.beta2) * grad.cwiseProduct(grad);
  state.max_second_moment = state.max_second_moment.cwiseMax(state.second_moment);
  const Eigen::MatrixXd denom =
      (state.max_second_moment / bias2).cwiseSqrt().array() + options.epsilon;
  weights.array() -= (learning_rate / bias1) * state.first_moment.array() / denom.array();
}

}  // namespace geoprobe
