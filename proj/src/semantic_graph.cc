#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "geoprobe/gold.h"

namespace geoprobe {

int SemanticGraph::Intern(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  names_.push_back(name);
  index_.emplace(name, id);
  undirected_.emplace_back();
  children_.emplace_back();
  parents_.emplace_back();
  return id;
}

void SemanticGraph::AddNode(const std::string& name) {
  if (name.empty()) throw InvalidArgument("empty node name");
  Intern(name);
}

SemanticGraph SemanticGraph::FromEdges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  SemanticGraph g;
  std::set<Edge> seen;
  for (const auto& [child, parent] : edges) {
    if (child.empty() || parent.empty()) throw InvalidArgument("empty node name in edge");
    if (child == parent) throw InvalidArgument("self-loop on '" + child + "'");
    const int c = g.Intern(child);
    const int p = g.Intern(parent);
    if (!seen.insert(MakeEdge(c, p)).second)
      throw InvalidArgument("duplicate edge " + child + " - " + parent);
    g.children_[p].push_back(c);
    g.parents_[c].push_back(p);
    g.undirected_[c].push_back(p);
    g.undirected_[p].push_back(c);
    ++g.edge_count_;
  }
  return g;
}

SemanticGraph SemanticGraph::ParseTsv(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> isolated;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      isolated.push_back(line);
      continue;
    }
    if (line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("expected child<TAB>parent", line_no);
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  SemanticGraph g;
  try {
    g = FromEdges(edges);
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  for (const auto& name : isolated) g.AddNode(name);
  return g;
}

SemanticGraph SemanticGraph::ReadTsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open graph file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseTsv(buf.str());
}

std::optional<int> SemanticGraph::Find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int SemanticGraph::IndexOf(const std::string& name) const {
  auto found = Find(name);
  if (!found) throw InvalidArgument("unknown graph node '" + name + "'");
  return *found;
}

std::vector<int> SemanticGraph::BfsFrom(int source) const {
  std::vector<int> dist(names_.size(), -1);
  std::queue<int> q;
  dist[source] = 0;
  q.push(source);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : undirected_[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

std::vector<std::optional<int>> SemanticGraph::Distances(
    const std::vector<std::pair<std::string, std::string>>& pairs) const {
  std::vector<std::pair<int, int>> resolved;
  resolved.reserve(pairs.size());
  for (const auto& [a, b] : pairs) resolved.emplace_back(IndexOf(a), IndexOf(b));

  // Group by source so each BFS is run once.
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return resolved[x].first < resolved[y].first;
  });
  std::vector<std::optional<int>> out(pairs.size());
  int current = -1;
  std::vector<int> dist;
  for (size_t idx : order) {
    const auto [a, b] = resolved[idx];
    if (a != current) {
      dist = BfsFrom(a);
      current = a;
    }
    if (dist[b] >= 0) out[idx] = dist[b];
  }
  return out;
}

std::vector<int> SemanticGraph::CategoryMembers(int root) const {
  std::vector<char> seen(names_.size(), 0);
  std::vector<int> stack{root};
  std::vector<int> members;
  seen[root] = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    members.push_back(u);
    for (int c : children_[u])
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
  }
  std::sort(members.begin(), members.end());
  return members;
}

std::vector<std::string> SemanticGraph::CategoryMembers(const std::string& root) const {
  std::vector<std::string> out;
  for (int m : CategoryMembers(IndexOf(root))) out.push_back(names_[m]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace geoprobe
