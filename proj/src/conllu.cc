#include <algorithm>
#include <charconv>
#include <fstream>
#include <queue>
#include <sstream>

#include "geoprobe/gold.h"

namespace geoprobe {
namespace {

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> cols;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

bool ParseInt(const std::string& s, int& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Returns the 0-based position of a word on a head cycle, or -1.
int FindCycle(const DependencySentence& s) {
  const int n = s.size();
  std::vector<int> state(n, 0);  // 0 unseen, 1 on current walk, 2 reaches root
  for (int start = 0; start < n; ++start) {
    std::vector<int> walk;
    int w = start;
    while (w >= 0 && state[w] == 0) {
      state[w] = 1;
      walk.push_back(w);
      w = s.words[w].head - 1;
    }
    if (w >= 0 && state[w] == 1) return w;
    for (int v : walk) state[v] = 2;
  }
  return -1;
}

struct PendingSentence {
  DependencySentence sentence;
  std::vector<int> lines;
  int first_line = 0;
};

void Finish(PendingSentence& p, std::vector<DependencySentence>& out) {
  if (p.sentence.words.empty()) {
    p = PendingSentence{};
    return;
  }
  auto& s = p.sentence;
  const int n = s.size();
  if (s.sentence_id.empty()) s.sentence_id = "s" + std::to_string(out.size() + 1);
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const int h = s.words[i].head;
    if (h < 0 || h > n)
      throw ParseError("head " + std::to_string(h) + " does not exist in sentence '" +
                           s.sentence_id + "' of " + std::to_string(n) + " words",
                       p.lines[i]);
    if (h == i + 1) throw ParseError("word is its own head", p.lines[i]);
    if (h == 0) ++roots;
  }
  if (roots != 1)
    throw ParseError("sentence '" + s.sentence_id + "' has " + std::to_string(roots) +
                         " roots",
                     p.first_line);
  if (const int w = FindCycle(s); w >= 0)
    throw ParseError("cyclic heads in sentence '" + s.sentence_id + "'", p.lines[w]);
  out.push_back(std::move(s));
  p = PendingSentence{};
}

}  // namespace

void DependencySentence::Validate() const {
  const int n = size();
  int roots = 0;
  for (const auto& w : words) {
    if (w.head < 0 || w.head > n)
      throw InvalidArgument("sentence '" + sentence_id + "': head out of range");
    if (w.head == 0) ++roots;
  }
  if (roots != 1)
    throw InvalidArgument("sentence '" + sentence_id + "' must have exactly one root");
  if (FindCycle(*this) >= 0)
    throw InvalidArgument("sentence '" + sentence_id + "' has cyclic heads");
}

std::vector<Edge> DependencySentence::Edges() const {
  std::vector<Edge> edges;
  for (int i = 0; i < size(); ++i)
    if (words[i].head > 0) edges.push_back(MakeEdge(i, words[i].head - 1));
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::vector<DependencySentence> ParseConllu(const std::string& text) {
  std::vector<DependencySentence> out;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  PendingSentence pending;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (Trim(raw).empty()) {
      Finish(pending, out);
      continue;
    }
    if (pending.first_line == 0) pending.first_line = line_no;
    if (raw[0] == '#') {
      const std::string body = Trim(raw.substr(1));
      if (body.rfind("sent_id", 0) == 0) {
        const auto eq = body.find('=');
        if (eq != std::string::npos) pending.sentence.sentence_id = Trim(body.substr(eq + 1));
      }
      continue;
    }
    const auto cols = SplitTabs(raw);
    if (cols.size() != 10)
      throw ParseError("expected 10 tab-separated columns, found " +
                           std::to_string(cols.size()),
                       line_no);
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    int position = 0;
    if (!ParseInt(id, position))
      throw ParseError("word id '" + id + "' is not an integer", line_no);
    if (position != pending.sentence.size() + 1)
      throw ParseError("word id " + id + " out of sequence", line_no);
    int head = 0;
    if (!ParseInt(cols[6], head))
      throw ParseError("head '" + cols[6] + "' is not an integer", line_no);
    pending.sentence.words.push_back({cols[1], head, id});
    pending.lines.push_back(line_no);
  }
  Finish(pending, out);
  return out;
}

std::vector<DependencySentence> ReadConllu(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open CoNLL-U file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return ParseConllu(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Eigen::MatrixXi TreeDistanceMatrix(const DependencySentence& sentence) {
  const int n = sentence.size();
  std::vector<std::vector<int>> adj(n);
  for (const auto& [a, b] : sentence.Edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  Eigen::MatrixXi d = Eigen::MatrixXi::Constant(n, n, -1);
  for (int s = 0; s < n; ++s) {
    std::queue<int> q;
    q.push(s);
    d(s, s) = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (d(s, v) < 0) {
          d(s, v) = d(s, u) + 1;
          q.push(v);
        }
    }
  }
  return d;
}

Eigen::MatrixXi LinearTreeDistances(int n) {
  if (n < 1) throw InvalidArgument("linear tree needs at least one word");
  Eigen::MatrixXi d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = std::abs(i - j);
  return d;
}

}  // namespace geoprobe
