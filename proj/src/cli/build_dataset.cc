#include <ostream>

#include "cli/commands.h"
#include "geoprobe/cli.h"
#include "geoprobe/dataset.h"

namespace geoprobe::cli {

int BuildDataset(const RunConfig& config, std::ostream& out, std::ostream&) {
  const nlohmann::json& section = config.Section("dataset");
  Provenance provenance(config);
  const fs::path lexicon_path = config.RequirePath("dataset.lexicon");
  const fs::path graph_path = config.RequirePath("dataset.graph");
  provenance.AddInput("lexicon", lexicon_path);
  provenance.AddInput("graph", graph_path);

  auto graph = std::make_shared<SemanticGraph>(SemanticGraph::ReadTsv(graph_path));
  const Lexicon lexicon = ReadLexicon(lexicon_path, graph);
  const UnisemicResult unisemic = UnisemicWordlist(lexicon);
  std::vector<SynsetLemma> pairs = unisemic.pairs;
  if (const auto vocab = config.Path("dataset.vocabulary")) {
    provenance.AddInput("vocabulary", config.RequirePath("dataset.vocabulary"));
    pairs = FilterVocabulary(pairs, ReadVocabulary(*vocab));
  }
  if (pairs.empty()) throw InvalidArgument("no synset survives the unisemic and vocabulary filters");

  std::vector<std::string> synsets;
  for (const auto& [synset, lemma] : pairs) synsets.push_back(synset);
  const int min_size = section.value("min_category_size", 5);
  const auto categories = BuildCategories(*graph, synsets, min_size);
  CategoryList members;
  for (const auto& [root, m] : categories) members.push_back(m);

  AnnealingOptions options;
  options.test_fraction = section.value("test_fraction", options.test_fraction);
  options.iterations = section.value("iterations", options.iterations);
  options.cooling = section.value("cooling", options.cooling);
  options.initial_temperature = section.value("initial_temperature", options.initial_temperature);
  options.seed = config.seed;
  const SplitAssignment split = SaSplit(static_cast<int>(synsets.size()), members, options);

  CsvWriter pair_csv(provenance, {"synset", "lemma"});
  for (const auto& [synset, lemma] : pairs) pair_csv.Row({synset, lemma});
  WriteFileAtomic(config.out / "pairs.csv", pair_csv.str());

  nlohmann::json roles = nlohmann::json::object();
  for (size_t i = 0; i < synsets.size(); ++i) roles[synsets[i]] = split.in_test[i] ? "test" : "train";
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [iteration, cost] : split.cost_trace) trace.push_back({iteration, cost});
  WriteJson(config.out / "split.json",
            {{"roles", roles},
             {"test_fraction", split.test_fraction},
             {"initial_cost", split.initial_cost},
             {"cost", split.cost},
             {"cost_trace", trace},
             {"pruned_leaves", unisemic.pruned_leaves},
             {"dropped", unisemic.dropped}},
            provenance);

  CsvWriter fractions(provenance, {"category", "size", "test_members", "test_fraction"});
  for (size_t j = 0; j < categories.size(); ++j) {
    const int size = static_cast<int>(categories[j].second.size());
    int test = 0;
    for (int m : categories[j].second) test += split.in_test[m];
    fractions.Row({categories[j].first, std::to_string(size), std::to_string(test),
                   FormatDouble(split.category_fraction[j])});
  }
  WriteFileAtomic(config.out / "category_fractions.csv", fractions.str());

  out << "build-dataset: " << pairs.size() << " pairs, " << categories.size()
      << " categories, " << split.test_count() << " test elements, cost " << FormatDouble(split.initial_cost)
      << " -> " << FormatDouble(split.cost) << "\n";
  return kExitOk;
}

}  // namespace geoprobe::cli
