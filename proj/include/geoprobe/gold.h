#ifndef GEOPROBE_GOLD_H_
#define GEOPROBE_GOLD_H_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geoprobe/error.h"

namespace geoprobe {

using Edge = std::pair<int, int>;  // undirected, stored as (min, max)

inline Edge MakeEdge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// ---------------------------------------------------------------------------
// Dependency trees.

struct DependencyWord {
  std::string form;
  int head = 0;  // 1-based position of the head word, 0 for the root
  std::string token_id;  // id column as written in the source file
};

struct DependencySentence {
  std::string sentence_id;
  std::vector<DependencyWord> words;

  int size() const { return static_cast<int>(words.size()); }
  // Exactly one root and an acyclic head chain from every word.
  void Validate() const;
  // Undirected tree edges over 0-based word positions, sorted.
  std::vector<Edge> Edges() const;
};

// Range lines ("3-4") and empty nodes ("3.1") are skipped. Sentence ids come
// from "# sent_id = ..." comments when present, otherwise "s<ordinal>".
std::vector<DependencySentence> ParseConllu(const std::string& text);
std::vector<DependencySentence> ReadConllu(const std::filesystem::path& path);

// Path lengths on the undirected dependency tree.
Eigen::MatrixXi TreeDistanceMatrix(const DependencySentence& sentence);

// |i - j| in surface order: the "linear tree" control.
Eigen::MatrixXi LinearTreeDistances(int n);

// ---------------------------------------------------------------------------
// Hypernymy graph.

class SemanticGraph {
 public:
  SemanticGraph() = default;
  // Edges are (hyponym, hypernym). Self-loops and duplicates are rejected.
  static SemanticGraph FromEdges(const std::vector<std::pair<std::string, std::string>>& edges);
  // TSV "child<TAB>parent"; blank lines and '#' comments skipped. A line with a
  // single column declares an isolated node.
  static SemanticGraph ParseTsv(const std::string& text);
  static SemanticGraph ReadTsv(const std::filesystem::path& path);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int node) const { return names_[node]; }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<int> Find(const std::string& name) const;
  int IndexOf(const std::string& name) const;  // throws InvalidArgument

  const std::vector<int>& Neighbors(int node) const { return undirected_[node]; }
  const std::vector<int>& Hyponyms(int node) const { return children_[node]; }
  const std::vector<int>& Hypernyms(int node) const { return parents_[node]; }
  bool IsLeaf(int node) const { return children_[node].empty(); }
  size_t edge_count() const { return edge_count_; }

  void AddNode(const std::string& name);

  // BFS edge counts from `source` over the undirected view; -1 = unreachable.
  std::vector<int> BfsFrom(int source) const;

  // Shortest undirected path lengths; nullopt when the pair is disconnected.
  std::vector<std::optional<int>> Distances(
      const std::vector<std::pair<std::string, std::string>>& pairs) const;

  // The root plus every synset reaching it through hypernym links.
  std::vector<int> CategoryMembers(int root) const;
  std::vector<std::string> CategoryMembers(const std::string& root) const;

 private:
  int Intern(const std::string& name);

  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> undirected_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> parents_;
  size_t edge_count_ = 0;
};

// ---------------------------------------------------------------------------
// Articulatory features.

struct PhonemeFeatureTable {
  std::vector<std::string> feature_names;
  std::map<std::string, std::vector<int>> features;  // entries in {-1, 0, 1}

  int feature_count() const { return static_cast<int>(feature_names.size()); }
  bool Contains(const std::string& symbol) const { return features.count(symbol) > 0; }
};

// CSV with header "symbol,f1,...,fF".
PhonemeFeatureTable ParsePhonemeTable(const std::string& text);
PhonemeFeatureTable ReadPhonemeTable(const std::filesystem::path& path);

// Number of coordinates whose values differ (0 vs +-1 counts as different).
int PhonemeDissimilarity(const std::string& p, const std::string& q,
                         const PhonemeFeatureTable& table);

// ---------------------------------------------------------------------------
// A pairwise-distance provider over identified elements, used by training and
// evaluation alike.

enum class StructureKind { kPhoneme, kSemantic, kSyntax };

std::string ToString(StructureKind kind);
StructureKind ParseStructureKind(const std::string& name);

class GoldStructure {
 public:
  virtual ~GoldStructure() = default;

  virtual StructureKind kind() const = 0;
  // Distance between elements a and b; nullopt when undefined (different
  // sentences, disconnected graph components).
  virtual std::optional<double> Distance(int a, int b) const = 0;
  // True when the structure defines graph adjacency (trees, hypernymy).
  virtual bool HasTopology() const = 0;
  // Elements directly linked to `a`. Empty when !HasTopology().
  virtual std::vector<int> Neighbors(int a) const = 0;

  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<std::string>& element_ids() const { return ids_; }
  const std::string& element_id(int i) const { return ids_[i]; }
  // Sentence partition for syntax; empty for pooled structures.
  const std::vector<std::vector<int>>& groups() const { return groups_; }
  const std::vector<std::string>& group_ids() const { return group_ids_; }
  // Index of the group containing element i, or -1.
  int group_of(int i) const { return group_of_.empty() ? -1 : group_of_[i]; }
  std::optional<int> Find(const std::string& id) const;

 protected:
  void SetElements(std::vector<std::string> ids);
  void SetGroups(std::vector<std::vector<int>> groups, std::vector<std::string> group_ids);

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<int>> groups_;
  std::vector<std::string> group_ids_;
  std::vector<int> group_of_;
};

// Element ids are "<sentence_id>:<word position>", positions 1-based.
std::string SyntaxElementId(const std::string& sentence_id, int position);

// Tree distances within sentences. With `linear` set, distances are |i - j|
// and adjacency follows surface order instead.
std::unique_ptr<GoldStructure> MakeSyntaxGold(std::vector<DependencySentence> sentences,
                                              bool linear = false);

// Elements are graph nodes; distances are undirected path lengths over the
// full graph (intermediate nodes need not be elements).
std::unique_ptr<GoldStructure> MakeSemanticGold(std::shared_ptr<const SemanticGraph> graph,
                                                const std::vector<std::string>& elements);

// Elements are (element id, IPA symbol) tokens.
std::unique_ptr<GoldStructure> MakePhonemeGold(
    std::shared_ptr<const PhonemeFeatureTable> table,
    const std::vector<std::pair<std::string, std::string>>& tokens);

}  // namespace geoprobe

#endif  // GEOPROBE_GOLD_H_
