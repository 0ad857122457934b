#include "geoprobe/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "geoprobe/random.h"

namespace geoprobe {

std::vector<double> AverageRanks(std::span<const double> values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double Pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("correlation inputs differ in length");
  if (x.size() < 2) throw InvalidArgument("correlation needs at least two values");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw InvalidArgument("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double Spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman inputs differ in length");
  const auto rx = AverageRanks(x);
  const auto ry = AverageRanks(y);
  return Pearson(rx, ry);
}

Eigen::MatrixXd SquaredDistances(const Eigen::MatrixXd& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0;
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (points.row(i) - points.row(j)).squaredNorm();
  }
  return d;
}

std::optional<double> EvalReport::Recompute() const {
  if (group_scores.empty()) return std::nullopt;
  if (aggregate_kind == "median") {
    std::vector<double> s = group_scores;
    std::sort(s.begin(), s.end());
    const size_t m = s.size() / 2;
    return s.size() % 2 ? s[m] : 0.5 * (s[m - 1] + s[m]);
  }
  return std::accumulate(group_scores.begin(), group_scores.end(), 0.0) /
         static_cast<double>(group_scores.size());
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json groups = nlohmann::json::array();
  for (size_t i = 0; i < group_ids.size(); ++i)
    groups.push_back({{"id", group_ids[i]}, {"score", group_scores[i]}});
  return {
      {"metric", metric},
      {"grouping", grouping},
      {"aggregate_kind", aggregate_kind},
      {"aggregate", aggregate ? nlohmann::json(*aggregate) : nlohmann::json(nullptr)},
      {"element_count", element_count},
      {"excluded_groups", excluded_groups},
      {"probe", probe_id},
      {"layer", layer},
      {"checkpoint_words", checkpoint_words ? nlohmann::json(*checkpoint_words) : nlohmann::json(nullptr)},
      {"groups", groups},
  };
}

std::string EvalReport::ToCsv() const {
  std::string out = "group,score\n";
  char buf[64];
  for (size_t i = 0; i < group_ids.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", group_scores[i]);
    out += group_ids[i] + "," + buf + "\n";
  }
  return out;
}

int DefaultEvalSetSize(StructureKind kind) {
  switch (kind) {
    case StructureKind::kPhoneme: return 200;
    case StructureKind::kSemantic: return 12;
    case StructureKind::kSyntax: return 0;
  }
  return 0;
}

std::vector<std::pair<std::string, std::vector<int>>> EvaluationGroups(
    const GoldStructure& gold, const std::vector<int>& elements, const EvalOptions& options) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  if (!gold.groups().empty()) {
    std::vector<char> wanted(gold.size(), 0);
    for (int e : elements) wanted[e] = 1;
    for (size_t g = 0; g < gold.groups().size(); ++g) {
      std::vector<int> members;
      for (int e : gold.groups()[g])
        if (wanted[e]) members.push_back(e);
      if (!members.empty()) out.emplace_back(gold.group_ids()[g], std::move(members));
    }
    return out;
  }
  std::vector<int> pool = elements;
  std::sort(pool.begin(), pool.end());
  Rng rng(options.seed);
  rng.Shuffle(pool);
  int size = options.set_size > 0 ? options.set_size : DefaultEvalSetSize(gold.kind());
  if (size <= 0) size = static_cast<int>(pool.size());
  for (size_t start = 0, id = 0; start < pool.size(); start += size, ++id) {
    const size_t end = std::min(pool.size(), start + static_cast<size_t>(size));
    out.emplace_back("set" + std::to_string(id), std::vector<int>(pool.begin() + start, pool.begin() + end));
  }
  return out;
}

namespace {

Eigen::MatrixXd ProjectElements(const Eigen::MatrixXd& w, const Eigen::MatrixXd& h,
                                const std::vector<int>& members) {
  Eigen::MatrixXd p(static_cast<Eigen::Index>(members.size()), w.cols());
  for (size_t i = 0; i < members.size(); ++i)
    p.row(static_cast<Eigen::Index>(i)).noalias() = h.row(members[i]) * w;
  return p;
}

void CheckInputs(const Eigen::MatrixXd& w, const Eigen::MatrixXd& h, const GoldStructure& gold,
                 const std::vector<int>& elements) {
  if (h.rows() != gold.size()) throw InvalidArgument("activation rows do not match gold elements");
  if (w.rows() != h.cols()) throw InvalidArgument("probe input dimension does not match activations");
  for (int e : elements)
    if (e < 0 || e >= gold.size()) throw InvalidArgument("evaluation element out of range");
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Mean rank of `positives` among the others sorted by `row` (ties averaged).
double NodeRank(const std::vector<double>& row_without_self, const std::vector<int>& others,
                const std::vector<int>& positives) {
  const auto ranks = AverageRanks(row_without_self);
  double sum = 0;
  for (int p : positives) {
    const auto it = std::find(others.begin(), others.end(), p);
    sum += ranks[static_cast<size_t>(it - others.begin())];
  }
  return sum / static_cast<double>(positives.size());
}

}  // namespace

EvalReport EvalDistanceProbe(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                             const GoldStructure& gold, const std::vector<int>& elements,
                             const EvalOptions& options) {
  CheckInputs(weights, h, gold, elements);
  EvalReport report;
  report.metric = "spearman";
  report.grouping = gold.groups().empty() ? "set" : "sentence";
  report.element_count = static_cast<int>(elements.size());
  for (const auto& [id, members] : EvaluationGroups(gold, elements, options)) {
    if (static_cast<int>(members.size()) < options.min_group_size) {
      ++report.excluded_groups;
      continue;
    }
    const Eigen::MatrixXd proj = ProjectElements(weights, h, members);
    std::vector<double> predicted, target;
    for (size_t i = 0; i < members.size(); ++i)
      for (size_t j = i + 1; j < members.size(); ++j) {
        const auto d = gold.Distance(members[i], members[j]);
        if (!d) continue;
        target.push_back(*d);
        predicted.push_back((proj.row(static_cast<Eigen::Index>(i)) - proj.row(static_cast<Eigen::Index>(j))).squaredNorm());
      }
    try {
      report.group_scores.push_back(Spearman(target, predicted));
      report.group_ids.push_back(id);
    } catch (const InvalidArgument&) {
      ++report.excluded_groups;
    }
  }
  report.aggregate = report.Recompute();
  return report;
}

std::vector<Edge> MinimumSpanningTree(const Eigen::MatrixXd& distances) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw InvalidArgument("distance matrix must be square");
  std::vector<std::tuple<double, int, int>> edges;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (!std::isfinite(distances(i, j))) throw InvalidArgument("distance matrix has non-finite entries");
      if (distances(i, j) != distances(j, i)) throw InvalidArgument("distance matrix is not symmetric");
      edges.emplace_back(distances(i, j), static_cast<int>(i), static_cast<int>(j));
    }
  std::sort(edges.begin(), edges.end());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<Edge> tree;
  for (const auto& [w, i, j] : edges) {
    const int ri = find(i), rj = find(j);
    if (ri == rj) continue;
    parent[ri] = rj;
    tree.emplace_back(i, j);
    if (static_cast<Eigen::Index>(tree.size()) == n - 1) break;
  }
  std::sort(tree.begin(), tree.end());
  return tree;
}

double Uuas(const std::vector<Edge>& predicted, const std::vector<Edge>& gold) {
  if (predicted.size() != gold.size())
    throw InvalidArgument("predicted tree has " + std::to_string(predicted.size()) +
                          " edges, gold has " + std::to_string(gold.size()));
  if (gold.empty()) return 1.0;
  std::set<Edge> gold_set;
  for (const auto& [a, b] : gold) gold_set.insert(MakeEdge(a, b));
  int hits = 0;
  std::set<Edge> seen;
  for (const auto& [a, b] : predicted) {
    const Edge e = MakeEdge(a, b);
    if (seen.insert(e).second && gold_set.count(e)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double Uuas(const std::vector<Edge>& predicted, const DependencySentence& sentence) {
  return Uuas(predicted, sentence.Edges());
}

EvalReport EvalUuas(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                    const GoldStructure& gold, const std::vector<int>& elements) {
  CheckInputs(weights, h, gold, elements);
  if (gold.groups().empty()) throw InvalidArgument("UUAS needs sentence groups");
  EvalReport report;
  report.metric = "uuas";
  report.grouping = "sentence";
  report.element_count = static_cast<int>(elements.size());
  for (const auto& [id, members] : EvaluationGroups(gold, elements, {})) {
    const int g = gold.group_of(members[0]);
    if (members.size() != gold.groups()[g].size() || members.size() < 2) {
      ++report.excluded_groups;
      continue;
    }
    std::vector<Edge> gold_edges;
    if (gold.HasTopology()) {
      std::map<int, int> local;
      for (size_t i = 0; i < members.size(); ++i) local[members[i]] = static_cast<int>(i);
      for (size_t i = 0; i < members.size(); ++i)
        for (int nb : gold.Neighbors(members[i])) {
          auto it = local.find(nb);
          if (it != local.end() && it->second > static_cast<int>(i))
            gold_edges.emplace_back(static_cast<int>(i), it->second);
        }
    } else {
      for (size_t i = 0; i < members.size(); ++i)
        for (size_t j = i + 1; j < members.size(); ++j)
          if (gold.Distance(members[i], members[j]) == 1.0)
            gold_edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
    const auto predicted = MinimumSpanningTree(SquaredDistances(ProjectElements(weights, h, members)));
    report.group_scores.push_back(Uuas(predicted, gold_edges));
    report.group_ids.push_back(id);
  }
  report.aggregate = report.Recompute();
  return report;
}

RankScoreResult RankScore(const Eigen::MatrixXd& distances,
                          const std::vector<std::vector<int>>& positives) {
  const int n = static_cast<int>(distances.rows());
  if (distances.cols() != n || static_cast<int>(positives.size()) != n)
    throw InvalidArgument("rank score needs a square matrix and one positive list per node");
  RankScoreResult result;
  result.node_scores.resize(n);
  std::vector<double> scored;
  for (int i = 0; i < n; ++i) {
    if (positives[i].empty()) {
      ++result.skipped;
      continue;
    }
    std::vector<int> others;
    std::vector<double> row;
    for (int j = 0; j < n; ++j)
      if (j != i) {
        others.push_back(j);
        row.push_back(distances(i, j));
      }
    for (int p : positives[i])
      if (p == i || p < 0 || p >= n) throw InvalidArgument("invalid positive index");
    result.node_scores[i] = NodeRank(row, others, positives[i]);
    scored.push_back(*result.node_scores[i]);
  }
  if (!scored.empty()) result.median = Median(scored);
  return result;
}

EvalReport EvalRankScore(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                         const GoldStructure& gold, const std::vector<int>& elements) {
  CheckInputs(weights, h, gold, elements);
  if (!gold.HasTopology()) throw InvalidArgument("rank score needs graph adjacency");
  EvalReport report;
  report.metric = "rank";
  report.grouping = "node";
  report.aggregate_kind = "median";
  report.element_count = static_cast<int>(elements.size());

  auto score_block = [&](const std::vector<int>& members) {
    std::vector<int> local(gold.size(), -1);
    for (size_t i = 0; i < members.size(); ++i) local[members[i]] = static_cast<int>(i);
    const Eigen::MatrixXd proj = ProjectElements(weights, h, members);
    for (size_t i = 0; i < members.size(); ++i) {
      std::vector<int> positives;
      for (int v : gold.Neighbors(members[i]))
        if (local[v] >= 0) positives.push_back(local[v]);
      if (positives.empty()) {
        ++report.excluded_groups;
        continue;
      }
      std::vector<int> others;
      std::vector<double> row;
      for (size_t j = 0; j < members.size(); ++j)
        if (j != i) {
          others.push_back(static_cast<int>(j));
          row.push_back((proj.row(static_cast<Eigen::Index>(i)) - proj.row(static_cast<Eigen::Index>(j))).squaredNorm());
        }
      report.group_scores.push_back(NodeRank(row, others, positives));
      report.group_ids.push_back(gold.element_id(members[i]));
    }
  };
  if (!gold.groups().empty()) {
    for (const auto& [id, members] : EvaluationGroups(gold, elements, {})) score_block(members);
  } else {
    std::vector<int> members = elements;
    std::sort(members.begin(), members.end());
    score_block(members);
  }
  report.aggregate = report.Recompute();
  return report;
}

std::vector<CategoryF1> KnnF1(const Eigen::MatrixXd& embeddings,
                              const std::vector<std::string>& element_ids,
                              const std::vector<int>& train, const std::vector<int>& test,
                              const std::vector<std::vector<int>>& categories, int k) {
  if (k < 1) throw InvalidArgument("k must be positive");
  if (static_cast<int>(train.size()) < k)
    throw InvalidArgument("KNN needs at least " + std::to_string(k) + " training points, got " +
                          std::to_string(train.size()));
  if (static_cast<size_t>(embeddings.rows()) != element_ids.size())
    throw InvalidArgument("embedding rows do not match element ids");

  // k nearest training neighbours of every test element.
  std::vector<std::vector<int>> nearest(test.size());
  for (size_t t = 0; t < test.size(); ++t) {
    std::vector<std::pair<double, int>> cand;
    for (int r : train) {
      if (r == test[t]) continue;
      cand.emplace_back((embeddings.row(test[t]) - embeddings.row(r)).squaredNorm(), r);
    }
    if (static_cast<int>(cand.size()) < k) throw InvalidArgument("too few training neighbours");
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end(), [&](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first < y.first;
      return element_ids[x.second] < element_ids[y.second];
    });
    for (int i = 0; i < k; ++i) nearest[t].push_back(cand[i].second);
  }

  const int votes_needed = (k + 1) / 2;
  std::vector<CategoryF1> out;
  std::vector<char> member(embeddings.rows());
  for (const auto& category : categories) {
    std::fill(member.begin(), member.end(), 0);
    for (int m : category) member[m] = 1;
    CategoryF1 s;
    for (size_t t = 0; t < test.size(); ++t) {
      int votes = 0;
      for (int r : nearest[t]) votes += member[r];
      const bool predicted = votes >= votes_needed;
      const bool actual = member[test[t]];
      s.predicted_positives += predicted;
      s.actual_positives += actual;
      s.true_positives += predicted && actual;
    }
    if (s.predicted_positives == 0 && s.actual_positives == 0) {
      s.f1 = s.precision = s.recall = 1.0;
    } else {
      s.precision = s.predicted_positives ? double(s.true_positives) / s.predicted_positives : 0.0;
      s.recall = s.actual_positives ? double(s.true_positives) / s.actual_positives : 0.0;
      s.f1 = s.true_positives ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

LinearControlResult LinearTreeControl(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h,
                                      const std::vector<DependencySentence>& sentences,
                                      const std::vector<int>& elements) {
  const auto tree = MakeSyntaxGold(sentences, false);
  const auto linear = MakeSyntaxGold(sentences, true);
  LinearControlResult r{EvalDistanceProbe(weights, h, *tree, elements),
                        EvalDistanceProbe(weights, h, *linear, elements)};
  r.versus_linear.metric = "spearman_linear";
  return r;
}

Eigen::MatrixXd CategoryCentroids(const Eigen::MatrixXd& embeddings,
                                  const std::vector<std::vector<int>>& categories) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(categories.size()), embeddings.cols());
  for (size_t c = 0; c < categories.size(); ++c) {
    if (categories[c].empty())
      throw InvalidArgument("category " + std::to_string(c) + " is empty");
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(embeddings.cols());
    for (int m : categories[c]) sum += embeddings.row(m);
    out.row(static_cast<Eigen::Index>(c)) = sum / static_cast<double>(categories[c].size());
  }
  return out;
}

NullBand MonteCarloNull(const std::function<double(Rng&)>& sample, int trials, uint64_t seed) {
  if (trials < 2) throw InvalidArgument("need at least two trials");
  Rng rng(seed);
  std::vector<double> v(trials);
  for (auto& x : v) x = sample(rng);
  NullBand band;
  band.mean = std::accumulate(v.begin(), v.end(), 0.0) / trials;
  double ss = 0;
  for (double x : v) ss += (x - band.mean) * (x - band.mean);
  band.stddev = std::sqrt(ss / (trials - 1));
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * (trials - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(v.size() - 1, lo + 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  band.lower = quantile(0.025);
  band.upper = quantile(0.975);
  return band;
}

}  // namespace geoprobe
