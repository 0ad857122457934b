#include "geoprobe/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "geoprobe/random.h"

namespace geoprobe {

void Lexicon::Validate() const {
  for (const auto& [synset, lemmas] : synsets)
    if (lemmas.empty()) throw InvalidArgument("synset '" + synset + "' has no lemmas");
  for (const auto& [lemma, f] : frequencies)
    if (!(f >= 0)) throw InvalidArgument("negative frequency for '" + lemma + "'");
}

Lexicon ParseLexicon(const std::string& json_text,
                     std::shared_ptr<const SemanticGraph> graph) {
  Lexicon lex;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    lex.synsets = doc.at("synsets").get<std::map<std::string, std::vector<std::string>>>();
    if (doc.contains("frequencies"))
      lex.frequencies = doc["frequencies"].get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("lexicon: ") + e.what());
  }
  lex.graph = std::move(graph);
  lex.Validate();
  return lex;
}

Lexicon ReadLexicon(const std::filesystem::path& path,
                    std::shared_ptr<const SemanticGraph> graph) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open lexicon " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseLexicon(buf.str(), std::move(graph));
}

namespace {

using LemmaLists = std::map<std::string, std::set<std::string>>;

std::map<std::string, int> CountOwners(const LemmaLists& lists) {
  std::map<std::string, int> owners;
  for (const auto& [synset, lemmas] : lists)
    for (const auto& l : lemmas) ++owners[l];
  return owners;
}

bool HasUniqueLemma(const std::set<std::string>& lemmas,
                    const std::map<std::string, int>& owners) {
  for (const auto& l : lemmas)
    if (owners.at(l) == 1) return true;
  return false;
}

// Synsets that already own a lemma drop the ones they share.
void ReleaseSharedLemmas(LemmaLists& lists) {
  bool changed = true;
  while (changed) {
    changed = false;
    const auto owners = CountOwners(lists);
    for (auto& [synset, lemmas] : lists) {
      if (!HasUniqueLemma(lemmas, owners)) continue;
      for (auto it = lemmas.begin(); it != lemmas.end();) {
        if (owners.at(*it) > 1) {
          it = lemmas.erase(it);
          changed = true;
        } else {
          ++it;
        }
      }
    }
  }
}

}  // namespace

UnisemicResult UnisemicWordlist(const Lexicon& lexicon) {
  LemmaLists lists;
  for (const auto& [synset, lemmas] : lexicon.synsets)
    lists[synset] = std::set<std::string>(lemmas.begin(), lemmas.end());

  ReleaseSharedLemmas(lists);

  UnisemicResult result;
  {
    const auto owners = CountOwners(lists);
    for (auto it = lists.begin(); it != lists.end();) {
      bool leaf = true;
      if (lexicon.graph) {
        if (auto node = lexicon.graph->Find(it->first)) leaf = lexicon.graph->IsLeaf(*node);
      }
      if (leaf && !HasUniqueLemma(it->second, owners)) {
        result.pruned_leaves.push_back(it->first);
        it = lists.erase(it);
      } else {
        ++it;
      }
    }
  }

  ReleaseSharedLemmas(lists);

  const auto owners = CountOwners(lists);
  for (const auto& [synset, lemmas] : lists) {
    const std::string* best = nullptr;
    double best_freq = -1;
    for (const auto& l : lemmas) {
      if (owners.at(l) != 1) continue;
      auto f = lexicon.frequencies.find(l);
      const double freq = f == lexicon.frequencies.end() ? 0.0 : f->second;
      if (freq > best_freq) {  // set order makes ties go to the smallest lemma
        best = &l;
        best_freq = freq;
      }
    }
    if (best)
      result.pairs.emplace_back(synset, *best);
    else
      result.dropped.push_back(synset);
  }
  return result;
}

std::vector<SynsetLemma> FilterVocabulary(const std::vector<SynsetLemma>& pairs,
                                          const std::set<std::string>& allowed) {
  std::vector<SynsetLemma> out;
  for (const auto& p : pairs) {
    std::istringstream words(p.second);
    std::string w;
    bool keep = false;
    while (words >> w) {
      keep = allowed.count(w) > 0;
      if (!keep) break;
    }
    if (keep) out.push_back(p);
  }
  return out;
}

std::set<std::string> ReadVocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open vocabulary " + path.string());
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ws(line);
    std::string w;
    while (ws >> w) words.insert(w);
  }
  return words;
}

double SplitCost(const std::vector<uint8_t>& in_test, const CategoryList& categories,
                 double test_fraction) {
  double cost = 0;
  for (const auto& members : categories) {
    double t = 0;
    for (int m : members) t += in_test[m];
    const double r = t - test_fraction * static_cast<double>(members.size());
    cost += r * r;
  }
  return cost;
}

bool AcceptMove(double delta, double temperature, double uniform01) {
  if (delta < 0) return true;
  if (temperature <= 0) return false;
  return uniform01 < std::exp(-delta / temperature);
}

int SplitAssignment::test_count() const {
  int c = 0;
  for (uint8_t t : in_test) c += t;
  return c;
}

SplitAssignment SaSplit(int element_count, const CategoryList& categories,
                        const AnnealingOptions& options) {
  if (categories.empty()) throw InvalidArgument("sa_split needs at least one category");
  if (!(options.test_fraction > 0 && options.test_fraction < 1))
    throw InvalidArgument("test fraction must lie in (0, 1)");
  if (element_count <= 0) throw InvalidArgument("sa_split needs elements");
  for (const auto& c : categories)
    for (int m : c)
      if (m < 0 || m >= element_count) throw InvalidArgument("category member out of range");

  std::vector<std::vector<int>> member_of(element_count);
  std::vector<double> target(categories.size());
  for (size_t j = 0; j < categories.size(); ++j) {
    for (int m : categories[j]) member_of[m].push_back(static_cast<int>(j));
    target[j] = options.test_fraction * static_cast<double>(categories[j].size());
  }

  Rng rng(options.seed);
  SplitAssignment out;
  out.test_fraction = options.test_fraction;
  out.in_test.resize(element_count);
  for (auto& t : out.in_test) t = rng.Uniform() < options.test_fraction ? 1 : 0;

  std::vector<double> test_count(categories.size(), 0.0);
  for (size_t j = 0; j < categories.size(); ++j)
    for (int m : categories[j]) test_count[j] += out.in_test[m];

  double cost = SplitCost(out.in_test, categories, options.test_fraction);
  out.initial_cost = cost;
  out.cost_trace.emplace_back(0, cost);

  double temperature = options.initial_temperature;
  for (int64_t it = 1; it <= options.iterations; ++it) {
    const int e = static_cast<int>(rng.Below(element_count));
    const double step = out.in_test[e] ? -1.0 : 1.0;
    // (t + s - c)^2 - (t - c)^2 = 2 s (t - c) + 1 for s = +-1
    double delta = 0;
    for (int j : member_of[e]) delta += 2.0 * step * (test_count[j] - target[j]) + 1.0;
    const double u = rng.Uniform();
    if (AcceptMove(delta, temperature, u)) {
      out.in_test[e] ^= 1;
      for (int j : member_of[e]) test_count[j] += step;
      cost += delta;
    }
    temperature *= options.cooling;
    if (options.trace_every > 0 && it % options.trace_every == 0)
      out.cost_trace.emplace_back(it, cost);
  }

  // Recompute rather than trust the running sum's rounding.
  out.cost = SplitCost(out.in_test, categories, options.test_fraction);
  out.category_fraction.resize(categories.size());
  for (size_t j = 0; j < categories.size(); ++j)
    out.category_fraction[j] =
        categories[j].empty() ? 0.0 : test_count[j] / static_cast<double>(categories[j].size());
  return out;
}

std::vector<std::pair<std::string, std::vector<int>>> BuildCategories(
    const SemanticGraph& graph, const std::vector<std::string>& elements, int min_size) {
  std::vector<int> element_of(graph.size(), -1);
  for (size_t i = 0; i < elements.size(); ++i)
    element_of[graph.IndexOf(elements[i])] = static_cast<int>(i);

  std::vector<int> order(graph.size());
  for (int i = 0; i < graph.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return graph.name(a) < graph.name(b); });

  std::map<std::vector<int>, std::string> by_members;
  for (int node : order) {
    if (graph.IsLeaf(node)) continue;
    std::vector<int> members;
    for (int m : graph.CategoryMembers(node))
      if (element_of[m] >= 0) members.push_back(element_of[m]);
    if (static_cast<int>(members.size()) < min_size) continue;
    std::sort(members.begin(), members.end());
    by_members.emplace(std::move(members), graph.name(node));  // first name wins
  }
  std::vector<std::pair<std::string, std::vector<int>>> out;
  for (auto& [members, root] : by_members) out.emplace_back(root, members);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace geoprobe
