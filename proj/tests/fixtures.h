// Shared generators and brute-force oracles for the test binaries.
#ifndef GEOPROBE_TESTS_FIXTURES_H_
#define GEOPROBE_TESTS_FIXTURES_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "geoprobe/gold.h"
#include "geoprobe/random.h"

namespace geoprobe::testing {

// Uniformly random labelled tree over n words: a random attachment order
// where each word hangs off a random earlier one.
inline DependencySentence RandomTree(Rng& rng, int n, const std::string& id) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.Shuffle(order);
  DependencySentence s;
  s.sentence_id = id;
  s.words.resize(n);
  for (int i = 0; i < n; ++i) {
    s.words[i].form = "w" + std::to_string(i + 1);
    s.words[i].token_id = std::to_string(i + 1);
  }
  s.words[order[0]].head = 0;
  for (int i = 1; i < n; ++i) s.words[order[i]].head = order[rng.Below(i)] + 1;
  return s;
}

inline DependencySentence ChainTree(int n, const std::string& id) {
  DependencySentence s;
  s.sentence_id = id;
  for (int i = 0; i < n; ++i) s.words.push_back({"w" + std::to_string(i + 1), i, std::to_string(i + 1)});
  return s;
}

// All-pairs shortest paths on an unweighted adjacency matrix; -1 where
// unreachable.
inline Eigen::MatrixXi FloydWarshall(const std::vector<std::vector<int>>& adjacency) {
  const int n = static_cast<int>(adjacency.size());
  const int inf = std::numeric_limits<int>::max() / 4;
  Eigen::MatrixXi d = Eigen::MatrixXi::Constant(n, n, inf);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0;
    for (int j : adjacency[i]) d(i, j) = 1;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (d(i, j) >= inf) d(i, j) = -1;
  return d;
}

inline Eigen::MatrixXd RandomOrthonormal(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd g(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) g(i, j) = rng.Normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

// Tree metric with a length per edge: word i's edge to its head has length
// weights[s][i] (ignored for the root). Unit lengths give path distances.
class WeightedTreeGold final : public GoldStructure {
 public:
  WeightedTreeGold(const std::vector<DependencySentence>& sentences,
                   const std::vector<std::vector<double>>& weights) {
    std::vector<std::string> ids;
    std::vector<std::vector<int>> groups;
    std::vector<std::string> group_ids;
    for (size_t g = 0; g < sentences.size(); ++g) {
      const auto& s = sentences[g];
      const int n = s.size();
      std::vector<int> members;
      for (int w = 0; w < n; ++w) {
        members.push_back(static_cast<int>(ids.size()));
        ids.push_back(SyntaxElementId(s.sentence_id, w + 1));
        offset_.push_back(w);
      }
      groups.push_back(members);
      group_ids.push_back(s.sentence_id);
      // Path lengths through the lowest common ancestor.
      Eigen::MatrixXd d(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d(i, j) = PathLength(s, weights[g], i, j);
      distances_.push_back(d);
      edges_.push_back(s.Edges());
    }
    SetElements(std::move(ids));
    SetGroups(std::move(groups), std::move(group_ids));
  }

  StructureKind kind() const override { return StructureKind::kSyntax; }
  bool HasTopology() const override { return true; }
  std::optional<double> Distance(int a, int b) const override {
    if (group_of(a) != group_of(b)) return std::nullopt;
    return distances_[group_of(a)](offset_[a], offset_[b]);
  }
  std::vector<int> Neighbors(int a) const override {
    const int g = group_of(a);
    const int base = groups()[g].front();
    std::vector<int> out;
    for (auto [x, y] : edges_[g]) {
      if (x == offset_[a]) out.push_back(base + y);
      if (y == offset_[a]) out.push_back(base + x);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static double PathLength(const DependencySentence& s, const std::vector<double>& w, int i, int j) {
    std::vector<double> up(s.size(), -1.0);  // length from i up to each ancestor
    double acc = 0;
    for (int v = i;; v = s.words[v].head - 1) {
      up[v] = acc;
      if (s.words[v].head == 0) break;
      acc += w[v];
    }
    acc = 0;
    for (int v = j;; v = s.words[v].head - 1) {
      if (up[v] >= 0) return acc + up[v];
      acc += w[v];
    }
  }

  std::vector<int> offset_;
  std::vector<Eigen::MatrixXd> distances_;
  std::vector<std::vector<Edge>> edges_;
};

// Activations whose projection onto a hidden p-dim subspace has squared
// distances equal to the tree metric: each tree edge gets its own orthonormal
// direction (randomly rotated per sentence), scaled by the square root of its
// length, and a word sits at the sum of the edge vectors on its path from the
// root. Gaussian noise fills the orthogonal complement.
struct PlantedFixture {
  std::vector<DependencySentence> sentences;
  std::vector<std::vector<double>> weights;  // per sentence, per word; empty = unit
  Eigen::MatrixXd h;      // rows in MakeSyntaxGold order
  Eigen::MatrixXd basis;  // k x p, the hidden subspace

  std::unique_ptr<GoldStructure> Gold() const {
    if (weights.empty()) return MakeSyntaxGold(sentences);
    return std::make_unique<WeightedTreeGold>(sentences, weights);
  }
};

inline Eigen::MatrixXd TreeCoordinates(Rng& rng, const DependencySentence& s, int p, bool rotate,
                                       const std::vector<double>* weights) {
  const int n = s.size();
  const Eigen::MatrixXd directions =
      rotate ? RandomOrthonormal(rng, p, p) : Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, p);
  std::vector<int> edge_dir(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i)
    if (s.words[i].head != 0) edge_dir[i] = next++;
  for (int i = 0; i < n; ++i)
    for (int w = i; s.words[w].head != 0; w = s.words[w].head - 1) {
      const double scale = weights ? std::sqrt((*weights)[w]) : 1.0;
      coords.row(i) += scale * directions.col(edge_dir[w]).transpose();
    }
  return coords;
}

struct PlantedOptions {
  int elements = 600;
  int k = 128;
  int p = 8;
  double noise = 0.1;
  int min_words = 4;
  int max_words = 9;     // at most p + 1 so every edge gets its own direction
  bool rotate = true;    // false: identity bases, exact integer coordinates
  bool weighted = false; // edge lengths uniform on [0.5, 1.5]
};

inline PlantedFixture MakePlantedFixture(const PlantedOptions& o, uint64_t seed) {
  Rng rng(seed);
  PlantedFixture f;
  const Eigen::MatrixXd full =
      o.rotate ? RandomOrthonormal(rng, o.k, o.k) : Eigen::MatrixXd(Eigen::MatrixXd::Identity(o.k, o.k));
  f.basis = full.leftCols(o.p);
  const Eigen::MatrixXd complement = full.rightCols(o.k - o.p);
  int total = 0;
  while (total < o.elements) {
    int n = o.min_words + static_cast<int>(rng.Below(o.max_words - o.min_words + 1));
    n = std::max(2, std::min(n, o.elements - total));
    f.sentences.push_back(RandomTree(rng, n, "s" + std::to_string(f.sentences.size() + 1)));
    if (o.weighted) {
      std::vector<double> w(n);
      for (double& x : w) x = rng.Uniform(0.5, 1.5);
      f.weights.push_back(w);
    }
    total += n;
  }
  f.h.resize(total, o.k);
  int row = 0;
  for (size_t g = 0; g < f.sentences.size(); ++g) {
    const auto& s = f.sentences[g];
    const Eigen::MatrixXd coords =
        TreeCoordinates(rng, s, o.p, o.rotate, o.weighted ? &f.weights[g] : nullptr);
    for (int i = 0; i < s.size(); ++i, ++row) {
      Eigen::VectorXd z(o.k - o.p);
      for (int j = 0; j < o.k - o.p; ++j) z(j) = o.noise * rng.Normal();
      f.h.row(row) = (f.basis * coords.row(i).transpose() + complement * z).transpose();
    }
  }
  return f;
}

inline PlantedFixture MakePlantedFixture(int elements, int k, int p, double noise, uint64_t seed,
                                         int min_words = 4, int max_words = 0, bool rotate = true) {
  PlantedOptions o;
  o.elements = elements;
  o.k = k;
  o.p = p;
  o.noise = noise;
  o.min_words = min_words;
  o.max_words = max_words ? max_words : p + 1;
  o.rotate = rotate;
  return MakePlantedFixture(o, seed);
}

}  // namespace geoprobe::testing

#endif  // GEOPROBE_TESTS_FIXTURES_H_
