#include <algorithm>
#include <cstdint>
#include <set>

#include "geoprobe/gold.h"

namespace geoprobe {

std::string ToString(StructureKind kind) {
  switch (kind) {
    case StructureKind::kPhoneme: return "phoneme";
    case StructureKind::kSemantic: return "semantic";
    case StructureKind::kSyntax: return "syntax";
  }
  return "unknown";
}

StructureKind ParseStructureKind(const std::string& name) {
  if (name == "phoneme") return StructureKind::kPhoneme;
  if (name == "semantic") return StructureKind::kSemantic;
  if (name == "syntax") return StructureKind::kSyntax;
  throw InvalidArgument("unknown task '" + name + "' (phoneme, semantic, syntax)");
}

void GoldStructure::SetElements(std::vector<std::string> ids) {
  index_.clear();
  for (size_t i = 0; i < ids.size(); ++i)
    if (!index_.emplace(ids[i], static_cast<int>(i)).second)
      throw InvalidArgument("duplicate gold element '" + ids[i] + "'");
  ids_ = std::move(ids);
}

void GoldStructure::SetGroups(std::vector<std::vector<int>> groups,
                              std::vector<std::string> group_ids) {
  group_of_.assign(ids_.size(), -1);
  for (size_t g = 0; g < groups.size(); ++g)
    for (int e : groups[g]) group_of_[e] = static_cast<int>(g);
  groups_ = std::move(groups);
  group_ids_ = std::move(group_ids);
}

std::optional<int> GoldStructure::Find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string SyntaxElementId(const std::string& sentence_id, int position) {
  return sentence_id + ":" + std::to_string(position);
}

namespace {

class SyntaxGold final : public GoldStructure {
 public:
  SyntaxGold(std::vector<DependencySentence> sentences, bool linear) {
    std::vector<std::string> ids;
    std::vector<std::vector<int>> groups;
    std::vector<std::string> group_ids;
    std::set<std::string> seen;
    for (auto& s : sentences) {
      s.Validate();
      if (!seen.insert(s.sentence_id).second)
        throw InvalidArgument("duplicate sentence id '" + s.sentence_id + "'");
      std::vector<int> members;
      for (int w = 0; w < s.size(); ++w) {
        members.push_back(static_cast<int>(ids.size()));
        ids.push_back(SyntaxElementId(s.sentence_id, w + 1));
        offset_.push_back(w);
      }
      groups.push_back(std::move(members));
      group_ids.push_back(s.sentence_id);
      distances_.push_back(linear ? LinearTreeDistances(s.size()) : TreeDistanceMatrix(s));
    }
    SetElements(std::move(ids));
    SetGroups(std::move(groups), std::move(group_ids));
  }

  StructureKind kind() const override { return StructureKind::kSyntax; }
  bool HasTopology() const override { return true; }

  std::optional<double> Distance(int a, int b) const override {
    const int g = group_of(a);
    if (g != group_of(b)) return std::nullopt;
    return distances_[g](offset_[a], offset_[b]);
  }

  std::vector<int> Neighbors(int a) const override {
    const int g = group_of(a);
    std::vector<int> out;
    for (int e : groups()[g])
      if (distances_[g](offset_[a], offset_[e]) == 1) out.push_back(e);
    return out;
  }

 private:
  std::vector<Eigen::MatrixXi> distances_;
  std::vector<int> offset_;
};

class SemanticGold final : public GoldStructure {
 public:
  static constexpr int kPrecomputeLimit = 8000;

  SemanticGold(std::shared_ptr<const SemanticGraph> graph,
               const std::vector<std::string>& elements)
      : graph_(std::move(graph)) {
    SetElements(elements);
    for (const auto& e : elements) node_.push_back(graph_->IndexOf(e));
    std::vector<int> element_of(graph_->size(), -1);
    for (size_t i = 0; i < node_.size(); ++i) element_of[node_[i]] = static_cast<int>(i);
    neighbors_.resize(node_.size());
    for (size_t i = 0; i < node_.size(); ++i) {
      for (int v : graph_->Neighbors(node_[i]))
        if (element_of[v] >= 0) neighbors_[i].push_back(element_of[v]);
      std::sort(neighbors_[i].begin(), neighbors_[i].end());
    }
    const int n = size();
    if (n <= kPrecomputeLimit) {
      table_.assign(static_cast<size_t>(n) * n, kUnreachable);
      for (int i = 0; i < n; ++i) {
        const auto dist = graph_->BfsFrom(node_[i]);
        for (int j = 0; j < n; ++j)
          if (dist[node_[j]] >= 0)
            table_[static_cast<size_t>(i) * n + j] =
                static_cast<uint16_t>(std::min(dist[node_[j]], kUnreachable - 1));
      }
    }
  }

  StructureKind kind() const override { return StructureKind::kSemantic; }
  bool HasTopology() const override { return true; }

  std::optional<double> Distance(int a, int b) const override {
    if (!table_.empty()) {
      const uint16_t d = table_[static_cast<size_t>(a) * size() + b];
      if (d == kUnreachable) return std::nullopt;
      return d;
    }
    const int d = graph_->BfsFrom(node_[a])[node_[b]];
    if (d < 0) return std::nullopt;
    return d;
  }

  std::vector<int> Neighbors(int a) const override { return neighbors_[a]; }

 private:
  static constexpr int kUnreachable = 0xffff;
  std::shared_ptr<const SemanticGraph> graph_;
  std::vector<int> node_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<uint16_t> table_;
};

class PhonemeGold final : public GoldStructure {
 public:
  PhonemeGold(std::shared_ptr<const PhonemeFeatureTable> table,
              const std::vector<std::pair<std::string, std::string>>& tokens)
      : table_(std::move(table)) {
    std::vector<std::string> ids;
    for (const auto& [id, symbol] : tokens) {
      if (!table_->Contains(symbol))
        throw InvalidArgument("element '" + id + "' has unknown phoneme '" + symbol + "'");
      ids.push_back(id);
      symbols_.push_back(symbol);
    }
    SetElements(std::move(ids));
    std::vector<std::string> distinct(symbols_.begin(), symbols_.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (const auto& s : symbols_)
      symbol_index_.push_back(static_cast<int>(
          std::lower_bound(distinct.begin(), distinct.end(), s) - distinct.begin()));
    const int m = static_cast<int>(distinct.size());
    dissimilarity_.resize(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        dissimilarity_(i, j) = PhonemeDissimilarity(distinct[i], distinct[j], *table_);
  }

  StructureKind kind() const override { return StructureKind::kPhoneme; }
  bool HasTopology() const override { return false; }

  std::optional<double> Distance(int a, int b) const override {
    return dissimilarity_(symbol_index_[a], symbol_index_[b]);
  }

  std::vector<int> Neighbors(int) const override { return {}; }

 private:
  std::shared_ptr<const PhonemeFeatureTable> table_;
  std::vector<std::string> symbols_;
  std::vector<int> symbol_index_;
  Eigen::MatrixXi dissimilarity_;
};

}  // namespace

std::unique_ptr<GoldStructure> MakeSyntaxGold(std::vector<DependencySentence> sentences,
                                              bool linear) {
  return std::make_unique<SyntaxGold>(std::move(sentences), linear);
}

std::unique_ptr<GoldStructure> MakeSemanticGold(std::shared_ptr<const SemanticGraph> graph,
                                                const std::vector<std::string>& elements) {
  return std::make_unique<SemanticGold>(std::move(graph), elements);
}

std::unique_ptr<GoldStructure> MakePhonemeGold(
    std::shared_ptr<const PhonemeFeatureTable> table,
    const std::vector<std::pair<std::string, std::string>>& tokens) {
  return std::make_unique<PhonemeGold>(std::move(table), tokens);
}

}  // namespace geoprobe
