// Brute-force reference implementations shared by unit and acceptance tests.
#ifndef GEOPROBE_TESTS_ORACLES_H_
#define GEOPROBE_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geoprobe/gold.h"
#include "geoprobe/random.h"

namespace geoprobe::testing {

// Rank by counting: 1 + #smaller + (#ties - 1) / 2.
inline std::vector<double> CountRanks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1 + less + (equal - 1) / 2;
  }
  return r;
}

inline double DirectPearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double TreeWeight(const std::vector<Edge>& edges, const Eigen::MatrixXd& d) {
  double w = 0;
  for (auto [a, b] : edges) w += d(a, b);
  return w;
}

inline bool Spans(int n, const std::vector<Edge>& edges) {
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  for (auto [a, b] : edges) {
    const int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    parent[ra] = rb;
  }
  return true;
}

// Minimum over every (n-1)-edge subset that forms a spanning tree.
inline std::vector<Edge> ExhaustiveMst(const Eigen::MatrixXd& d) {
  const int n = static_cast<int>(d.rows());
  std::vector<Edge> all;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) all.emplace_back(i, j);
  std::vector<Edge> best;
  double best_w = 1e300;
  const int m = static_cast<int>(all.size());
  for (int mask = 0; mask < (1 << m); ++mask) {
    if (__builtin_popcount(mask) != n - 1) continue;
    std::vector<Edge> edges;
    for (int e = 0; e < m; ++e)
      if (mask >> e & 1) edges.push_back(all[e]);
    if (!Spans(n, edges)) continue;
    const double w = TreeWeight(edges, d);
    if (w < best_w) {
      best_w = w;
      best = edges;
    }
  }
  return best;
}

inline Eigen::MatrixXd RandomSymmetric(Rng& rng, int n, bool integer) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = integer ? double(rng.Below(3)) : rng.Uniform();
  return d;
}

// Brute force: sort the other nodes by distance and average the positions of
// tied runs.
inline double BruteNodeRank(const Eigen::MatrixXd& d, int i, const std::vector<int>& positives) {
  std::vector<std::pair<double, int>> others;
  for (int j = 0; j < d.rows(); ++j)
    if (j != i) others.emplace_back(d(i, j), j);
  std::sort(others.begin(), others.end());
  std::vector<double> rank(d.rows());
  for (size_t a = 0; a < others.size();) {
    size_t b = a;
    while (b < others.size() && others[b].first == others[a].first) ++b;
    for (size_t c = a; c < b; ++c) rank[others[c].second] = (a + 1 + b) / 2.0;
    a = b;
  }
  double s = 0;
  for (int p : positives) s += rank[p];
  return s / positives.size();
}

}  // namespace geoprobe::testing

#endif  // GEOPROBE_TESTS_ORACLES_H_
