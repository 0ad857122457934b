#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "geoprobe/metrics.h"
#include "geoprobe/probe.h"
#include "geoprobe/random.h"

namespace geoprobe {

std::string ToString(Role role) {
  switch (role) {
    case Role::kTrain: return "train";
    case Role::kValidation: return "validation";
    case Role::kTest: return "test";
    case Role::kUnused: return "unused";
  }
  return "unused";
}

Role ParseRole(const std::string& name) {
  if (name == "train") return Role::kTrain;
  if (name == "validation") return Role::kValidation;
  if (name == "test") return Role::kTest;
  if (name == "unused") return Role::kUnused;
  throw InvalidArgument("unknown split label '" + name + "'");
}

std::vector<int> ElementSplit::Members(Role role) const {
  std::vector<int> out;
  for (size_t i = 0; i < roles.size(); ++i)
    if (roles[i] == role) out.push_back(static_cast<int>(i));
  return out;
}

ElementSplit MakeRandomSplit(const GoldStructure& gold, double validation_fraction,
                             double test_fraction, uint64_t seed) {
  if (validation_fraction < 0 || test_fraction < 0 || validation_fraction + test_fraction >= 1)
    throw InvalidArgument("split fractions must be nonnegative and sum below 1");
  const bool grouped = !gold.groups().empty();
  const int units = grouped ? static_cast<int>(gold.groups().size()) : gold.size();
  std::vector<int> order(units);
  for (int i = 0; i < units; ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);
  const int n_test = static_cast<int>(std::lround(test_fraction * units));
  const int n_val = static_cast<int>(std::lround(validation_fraction * units));
  ElementSplit split;
  split.roles.assign(gold.size(), Role::kTrain);
  for (int r = 0; r < units; ++r) {
    const Role role = r < n_test ? Role::kTest : (r < n_test + n_val ? Role::kValidation : Role::kTrain);
    if (grouped) {
      for (int e : gold.groups()[order[r]]) split.roles[e] = role;
    } else {
      split.roles[order[r]] = role;
    }
  }
  return split;
}

Eigen::MatrixXd AlignActivations(const ActivationMatrix& acts, const GoldStructure& gold) {
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (size_t i = 0; i < acts.element_ids.size(); ++i)
    row_of.emplace(acts.element_ids[i], static_cast<Eigen::Index>(i));
  Eigen::MatrixXd out(gold.size(), acts.cols());
  std::vector<std::string> missing;
  for (int e = 0; e < gold.size(); ++e) {
    auto it = row_of.find(gold.element_id(e));
    if (it == row_of.end()) {
      missing.push_back(gold.element_id(e));
      continue;
    }
    out.row(e) = acts.data.row(it->second).cast<double>();
  }
  if (!missing.empty()) {
    std::string list;
    for (size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ...";
    throw InvalidArgument(std::to_string(missing.size()) +
                          " gold elements missing from activations: " + list);
  }
  return out;
}

namespace {

struct Batch {
  std::vector<int> rows;  // global rows referenced by terms
  std::vector<int> a, b;  // local indices
  std::vector<double> target;  // distance objective
  // contrastive: per anchor, the term range [begin, end) and positive count
  struct Anchor {
    size_t begin = 0, end = 0, positives = 0;
  };
  std::vector<Anchor> anchors;
  std::unordered_map<int, int> local;

  int Add(int global) {
    auto [it, inserted] = local.emplace(global, static_cast<int>(rows.size()));
    if (inserted) rows.push_back(global);
    return it->second;
  }
  bool empty() const { return a.empty(); }
};

Eigen::MatrixXd ProjectRows(const Eigen::MatrixXd& h, const Eigen::MatrixXd& w,
                            const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), w.cols());
  for (size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)).noalias() = h.row(rows[i]) * w;
  return out;
}

Eigen::MatrixXd GradientFromTerms(const Eigen::MatrixXd& h, const Eigen::MatrixXd& projected,
                                  const Batch& batch, const std::vector<double>& coeff) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(projected.rows(), projected.cols());
  for (size_t t = 0; t < coeff.size(); ++t) {
    if (coeff[t] == 0) continue;
    const Eigen::RowVectorXd q = coeff[t] * (projected.row(batch.a[t]) - projected.row(batch.b[t]));
    r.row(batch.a[t]) += q;
    r.row(batch.b[t]) -= q;
  }
  Eigen::MatrixXd gathered(static_cast<Eigen::Index>(batch.rows.size()), h.cols());
  for (size_t i = 0; i < batch.rows.size(); ++i)
    gathered.row(static_cast<Eigen::Index>(i)) = h.row(batch.rows[i]);
  return 2.0 * gathered.transpose() * r;
}

// Mean absolute residual over all pairs; gradient written when requested.
double DistanceObjective(const Eigen::MatrixXd& w, const Eigen::MatrixXd& h, const Batch& batch,
                         Eigen::MatrixXd* grad) {
  const Eigen::MatrixXd projected = ProjectRows(h, w, batch.rows);
  const double scale = 1.0 / static_cast<double>(batch.a.size());
  double loss = 0;
  std::vector<double> coeff(batch.a.size());
  for (size_t t = 0; t < batch.a.size(); ++t) {
    const double r =
        (projected.row(batch.a[t]) - projected.row(batch.b[t])).squaredNorm() - batch.target[t];
    loss += std::abs(r);
    coeff[t] = r > 0 ? scale : (r < 0 ? -scale : 0.0);
  }
  if (grad) *grad = GradientFromTerms(h, projected, batch, coeff);
  return loss * scale;
}

double ContrastiveObjective(const Eigen::MatrixXd& w, const Eigen::MatrixXd& h,
                            const Batch& batch, Eigen::MatrixXd* grad) {
  const Eigen::MatrixXd projected = ProjectRows(h, w, batch.rows);
  const double scale = 1.0 / static_cast<double>(batch.anchors.size());
  std::vector<double> d(batch.a.size());
  for (size_t t = 0; t < d.size(); ++t)
    d[t] = (projected.row(batch.a[t]) - projected.row(batch.b[t])).squaredNorm();
  std::vector<double> coeff(d.size());
  double loss = 0;
  auto lse = [&](size_t begin, size_t end, double sign) {
    double lo = std::numeric_limits<double>::infinity();
    for (size_t t = begin; t < end; ++t) lo = std::min(lo, d[t]);
    double z = 0;
    for (size_t t = begin; t < end; ++t) z += std::exp(-(d[t] - lo));
    for (size_t t = begin; t < end; ++t) coeff[t] = sign * scale * std::exp(-(d[t] - lo)) / z;
    return -lo + std::log(z);
  };
  for (const auto& an : batch.anchors) {
    const size_t split = an.begin + an.positives;
    loss += -lse(an.begin, split, 1.0) + lse(split, an.end, -1.0);
  }
  if (grad) *grad = GradientFromTerms(h, projected, batch, coeff);
  return loss * scale;
}

class BatchBuilder {
 public:
  BatchBuilder(const TrainConfig& cfg, const GoldStructure& gold, const ElementSplit& split)
      : cfg_(cfg), gold_(gold) {
    if (split.roles.size() != static_cast<size_t>(gold.size()))
      throw InvalidArgument("split does not cover the gold elements");
    for (Role role : {Role::kTrain, Role::kValidation}) {
      auto& pool = pools_[static_cast<int>(role)];
      pool = split.Members(role);
      auto& groups = groups_[static_cast<int>(role)];
      for (const auto& g : gold.groups()) {
        std::vector<int> members;
        for (int e : g)
          if (split.roles[e] == role) members.push_back(e);
        if (members.size() >= 2) groups.push_back(std::move(members));
      }
      if (gold.HasTopology()) {
        std::vector<char> in_pool(gold.size(), 0);
        for (int e : pool) in_pool[e] = 1;
        auto& nb = neighbors_[static_cast<int>(role)];
        nb.assign(gold.size(), {});
        for (int e : pool)
          for (int v : gold.Neighbors(e))
            if (in_pool[v]) nb[e].push_back(v);
      }
    }
    if (cfg.objective == Objective::kContrastive && !gold.HasTopology())
      throw InvalidArgument("contrastive probes need a structure with graph adjacency (" +
                            ToString(gold.kind()) + " has none)");
  }

  bool grouped() const { return !gold_.groups().empty(); }

  // Sets of elements for one epoch (distance objective) in shuffled order.
  std::vector<std::vector<int>> EpochSets(Role role, Rng* rng) const {
    std::vector<std::vector<int>> sets;
    if (grouped()) {
      sets = groups_[static_cast<int>(role)];
      if (rng) rng->Shuffle(sets);
      return sets;
    }
    std::vector<int> pool = pools_[static_cast<int>(role)];
    if (rng) rng->Shuffle(pool);
    const size_t size = cfg_.set_size > 0 ? static_cast<size_t>(cfg_.set_size) : pool.size();
    for (size_t start = 0; start < pool.size(); start += size) {
      const size_t end = std::min(pool.size(), start + size);
      if (end - start >= 2) sets.emplace_back(pool.begin() + start, pool.begin() + end);
    }
    return sets;
  }

  Batch DistanceBatch(const std::vector<std::vector<int>>& sets, size_t begin, size_t end) const {
    Batch batch;
    for (size_t s = begin; s < end; ++s) {
      const auto& set = sets[s];
      for (size_t i = 0; i < set.size(); ++i)
        for (size_t j = i + 1; j < set.size(); ++j) {
          const auto d = gold_.Distance(set[i], set[j]);
          if (!d) continue;
          batch.a.push_back(batch.Add(set[i]));
          batch.b.push_back(batch.Add(set[j]));
          batch.target.push_back(*d);
        }
    }
    return batch;
  }

  // Anchor units for one epoch: sentences when grouped, single anchors
  // otherwise.
  std::vector<std::vector<int>> EpochAnchorUnits(Role role, Rng* rng) const {
    if (grouped()) return EpochSets(role, rng);
    std::vector<std::vector<int>> units;
    const auto& nb = neighbors_[static_cast<int>(role)];
    const size_t pool_size = pools_[static_cast<int>(role)].size();
    for (int e : pools_[static_cast<int>(role)])
      if (!nb[e].empty() && pool_size > nb[e].size() + 1) units.push_back({e});
    if (rng) rng->Shuffle(units);
    return units;
  }

  // Training samples one positive per anchor; validation (full == true) keeps
  // every positive.
  Batch ContrastiveBatch(const std::vector<std::vector<int>>& units, size_t begin, size_t end,
                         Role role, Rng& rng, bool full) const {
    Batch batch;
    const auto& nb = neighbors_[static_cast<int>(role)];
    const auto& pool = pools_[static_cast<int>(role)];
    auto emit = [&](int anchor, const std::vector<int>& positives,
                    const std::vector<int>& negatives) {
      Batch::Anchor an;
      an.begin = batch.a.size();
      const int la = batch.Add(anchor);
      for (int p : positives) {
        batch.a.push_back(la);
        batch.b.push_back(batch.Add(p));
      }
      for (int n : negatives) {
        batch.a.push_back(la);
        batch.b.push_back(batch.Add(n));
      }
      an.positives = positives.size();
      an.end = batch.a.size();
      batch.anchors.push_back(an);
    };
    const size_t cap = static_cast<size_t>(cfg_.negatives_per_anchor);
    for (size_t u = begin; u < end; ++u) {
      if (grouped()) {
        const auto& sentence = units[u];
        for (int anchor : sentence) {
          const auto& pos = nb[anchor];
          std::vector<int> neg;
          for (int e : sentence)
            if (e != anchor && std::find(pos.begin(), pos.end(), e) == pos.end()) neg.push_back(e);
          if (pos.empty() || neg.empty()) continue;
          if (!full && neg.size() > cap) {
            rng.Shuffle(neg);
            neg.resize(cap);
          }
          emit(anchor, full ? pos : std::vector<int>{pos[rng.Below(pos.size())]}, neg);
        }
      } else {
        const int anchor = units[u][0];
        const auto& pos = nb[anchor];
        std::vector<int> neg;
        while (neg.size() < cap) {
          const int cand = pool[rng.Below(pool.size())];
          if (cand == anchor || std::binary_search(pos.begin(), pos.end(), cand)) continue;
          neg.push_back(cand);
        }
        emit(anchor, full ? pos : std::vector<int>{pos[rng.Below(pos.size())]}, neg);
      }
    }
    return batch;
  }

 private:
  const TrainConfig& cfg_;
  const GoldStructure& gold_;
  std::vector<int> pools_[2];
  std::vector<std::vector<int>> groups_[2];
  std::vector<std::vector<int>> neighbors_[2];
};

}  // namespace

TrainResult TrainProbe(const TrainConfig& config, const Eigen::MatrixXd& h,
                       const GoldStructure& gold, const ElementSplit& split) {
  config.Validate();
  if (h.rows() != gold.size())
    throw InvalidArgument("activation rows do not match gold elements");
  const int k = static_cast<int>(h.cols());
  if (config.probe_dim > k)
    throw InvalidArgument("probe_dim " + std::to_string(config.probe_dim) +
                          " exceeds activation dimension " + std::to_string(k));

  BatchBuilder builder(config, gold, split);
  Rng rng(MixSeed(config.seed, 1));
  const bool contrastive = config.objective == Objective::kContrastive;

  // Fixed validation batch, identical every epoch.
  Batch validation;
  {
    Rng vrng(MixSeed(config.seed, 2));
    if (contrastive) {
      const auto units = builder.EpochAnchorUnits(Role::kValidation, nullptr);
      validation = builder.ContrastiveBatch(units, 0, units.size(), Role::kValidation, vrng, true);
    } else {
      const auto sets = builder.EpochSets(Role::kValidation, nullptr);
      validation = builder.DistanceBatch(sets, 0, sets.size());
    }
  }
  if (validation.empty())
    throw InvalidArgument("validation split yields no usable pairs or anchors");

  TrainResult result;
  Probe probe = InitProbe(k, config.probe_dim, config.seed, config.init_scale);
  probe.config = config;
  result.initial_weights = probe.weights;
  OptimizerState state = OptimizerState::Zeros(k, config.probe_dim);
  Eigen::MatrixXd grad;
  double best = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd best_weights = probe.weights;
  double best_train = 0;

  auto objective = [&](const Eigen::MatrixXd& w, const Batch& b, Eigen::MatrixXd* g) {
    return contrastive ? ContrastiveObjective(w, h, b, g) : DistanceObjective(w, h, b, g);
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto units = contrastive ? builder.EpochAnchorUnits(Role::kTrain, &rng)
                                   : builder.EpochSets(Role::kTrain, &rng);
    double epoch_loss = 0;
    int batches = 0;
    const size_t per_batch = static_cast<size_t>(config.sets_per_batch);
    for (size_t start = 0; start < units.size(); start += per_batch) {
      const size_t end = std::min(units.size(), start + per_batch);
      const Batch batch = contrastive
                              ? builder.ContrastiveBatch(units, start, end, Role::kTrain, rng, false)
                              : builder.DistanceBatch(units, start, end);
      if (batch.empty()) continue;
      epoch_loss += objective(probe.weights, batch, &grad);
      AmsGradStep(state, probe.weights, grad, config.learning_rate);
      ++batches;
    }
    if (batches == 0)
      throw InvalidArgument("training split yields no usable batch (too few elements)");
    result.train_loss.push_back(epoch_loss / batches);
    const double v = objective(probe.weights, validation, nullptr);
    result.validation_loss.push_back(v);
    if (v < best) {
      best = v;
      best_weights = probe.weights;
      best_train = result.train_loss.back();
      result.best_epoch = epoch;
    }
  }
  probe.weights = best_weights;
  probe.train_loss = best_train;
  probe.validation_loss = best;
  result.probe = std::move(probe);
  return result;
}

std::vector<double> LearningRateGrid(int count, double lowest, double highest, bool log_spaced) {
  if (count < 1) throw InvalidArgument("grid needs at least one value");
  if (!(lowest > 0) || highest < lowest) throw InvalidArgument("invalid grid bounds");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lowest;
    return grid;
  }
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    grid[i] = log_spaced ? std::pow(10.0, std::log10(lowest) + t * (std::log10(highest) - std::log10(lowest)))
                         : lowest + t * (highest - lowest);
  }
  grid.front() = lowest;
  grid.back() = highest;
  return grid;
}

double ValidationScore(const TrainResult& run, const Eigen::MatrixXd& h,
                       const GoldStructure& gold, const ElementSplit& split) {
  if (run.probe.config.objective == Objective::kContrastive) return -run.probe.validation_loss;
  EvalOptions opts;
  opts.set_size = run.probe.config.set_size;
  opts.seed = run.probe.config.seed;
  const auto report = EvalDistanceProbe(run.probe.weights, h, gold, split.Members(Role::kValidation), opts);
  return report.aggregate ? *report.aggregate : -std::numeric_limits<double>::infinity();
}

GridResult GridSearch(const TrainConfig& base, const Eigen::MatrixXd& h,
                      const GoldStructure& gold, const ElementSplit& split,
                      const std::vector<double>& learning_rates, int jobs) {
  if (learning_rates.empty()) throw InvalidArgument("empty learning-rate grid");
  if (split.Members(Role::kValidation).empty())
    throw InvalidArgument("grid search needs validation elements");
  const size_t n = learning_rates.size();
  std::vector<GridEntry> entries(n);
  std::vector<TrainResult> runs(n);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < n; i = next++) {
      entries[i].learning_rate = learning_rates[i];
      TrainConfig cfg = base;
      cfg.learning_rate = learning_rates[i];
      try {
        runs[i] = TrainProbe(cfg, h, gold, split);
        entries[i].validation_loss = runs[i].probe.validation_loss;
        entries[i].validation_score = ValidationScore(runs[i], h, gold, split);
      } catch (const std::exception& e) {
        entries[i].error = e.what();
        entries[i].validation_score = -std::numeric_limits<double>::infinity();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::optional<size_t> best;
  for (size_t i = 0; i < n; ++i) {
    if (!entries[i].error.empty()) continue;
    if (!best || entries[i].validation_score > entries[*best].validation_score ||
        (entries[i].validation_score == entries[*best].validation_score &&
         entries[i].learning_rate < entries[*best].learning_rate))
      best = i;
  }
  if (!best) {
    throw Error("grid search: every run failed; lr=" + std::to_string(entries[0].learning_rate) +
                ": " + entries[0].error);
  }
  GridResult result;
  result.entries = std::move(entries);
  result.best_run = std::move(runs[*best]);
  result.best_config = result.best_run.probe.config;
  return result;
}

}  // namespace geoprobe
