#include <algorithm>
#include <map>
#include <ostream>

#include "cli/commands.h"
#include "geoprobe/cli.h"
#include "geoprobe/dataset.h"
#include "geoprobe/metrics.h"
#include "geoprobe/random.h"

namespace geoprobe::cli {
namespace {

struct SweepRow {
  std::string probe;
  std::optional<int64_t> checkpoint_words;
  int layer = 0;
  std::string metric;
  EvalReport report;
};

// Metrics where a smaller score is better.
bool LowerIsBetter(const std::string& metric) { return metric == "rank"; }

EvalReport KnnReport(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& h, const GoldStructure& gold,
                     const SemanticGraph& graph, const ElementSplit& split, int k, int min_size) {
  const auto categories = BuildCategories(graph, gold.element_ids(), min_size);
  std::vector<int> train = split.Members(Role::kTrain);
  const auto validation = split.Members(Role::kValidation);
  train.insert(train.end(), validation.begin(), validation.end());
  std::sort(train.begin(), train.end());
  const std::vector<int> test = split.Members(Role::kTest);

  EvalReport r;
  r.metric = "knn_f1";
  r.grouping = "category";
  r.element_count = static_cast<int>(test.size());
  if (categories.empty()) return r;
  std::vector<std::vector<int>> members;
  for (const auto& [root, m] : categories) {
    r.group_ids.push_back(root);
    members.push_back(m);
  }
  const Eigen::MatrixXd embeddings = h * weights;
  for (const auto& c : KnnF1(embeddings, gold.element_ids(), train, test, members, k))
    r.group_scores.push_back(c.f1);
  r.aggregate = r.Recompute();
  return r;
}

std::string CheckpointCell(const std::optional<int64_t>& c) { return c ? std::to_string(*c) : ""; }

}  // namespace

int Eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Manifest manifest = ReadManifest(config.out / "manifest.json");
  if (manifest.task != config.task)
    throw InvalidArgument("manifest task " + ToString(manifest.task) + " differs from config task " +
                          ToString(config.task));
  const nlohmann::json& section = config.Section("eval");
  Provenance provenance(config);
  provenance.AddInput("manifest", config.out / "manifest.json");
  provenance.AddInput("split", config.out / "split.json");

  int warnings = 0;
  std::vector<fs::path> activation_files;
  std::vector<const ManifestEntry*> usable;
  for (const auto& e : manifest.entries) {
    if (e.status != "ok") {
      err << "warning: skipping " << e.activation << ": training failed: " << e.error << "\n";
      ++warnings;
      continue;
    }
    if (!fs::exists(manifest.dir / e.probe)) {
      err << "warning: skipping layer " << e.layer << ": missing probe " << e.probe << "\n";
      ++warnings;
      continue;
    }
    usable.push_back(&e);
    activation_files.push_back(e.activation);
  }
  if (usable.empty()) throw InvalidArgument("no usable probes in the manifest");

  LoadedGold loaded = LoadGoldForActivations(config, activation_files, provenance);
  const GoldStructure& gold = *loaded.gold;
  const ElementSplit split = LoadSplit(config.out / "split.json", gold, config.seed);
  const std::vector<int> test = split.Members(Role::kTest);

  EvalOptions options;
  options.set_size = section.value("set_size", 0);
  options.seed = MixSeed(config.seed, 5);
  const int knn_k = section.value("knn_k", 5);
  const int min_category = section.value("min_category_size", 100);
  const int layer_count = section.value("num_layers", manifest.LayerCount());

  std::vector<SweepRow> rows;
  for (const ManifestEntry* e : usable) {
    Eigen::MatrixXd h;
    Eigen::MatrixXd trained;
    try {
      const ActivationMatrix acts = LoadActivations(config, e->activation);
      if (FileDigest(e->activation) != e->activation_digest)
        err << "warning: " << e->activation << " changed since training\n";
      h = AlignActivations(acts, gold);
      trained = ReadTensor(manifest.dir / e->probe).ToDouble();
      if (trained.rows() != h.cols())
        throw InvalidArgument("probe has " + std::to_string(trained.rows()) + " rows for " +
                              std::to_string(h.cols()) + " activation units");
    } catch (const Error& ex) {
      err << "warning: skipping layer " << e->layer << ": " << ex.what() << "\n";
      ++warnings;
      continue;
    }

    std::vector<std::pair<std::string, Eigen::MatrixXd>> probes = {{"trained", trained}};
    if (config.flags.baseline)
      probes.emplace_back("random", RandomProbe(static_cast<int>(trained.rows()), static_cast<int>(trained.cols()),
                                                MixSeed(config.seed, 300 + static_cast<uint64_t>(e->layer))));

    for (const auto& [name, w] : probes) {
      auto add = [&](const std::string& metric, EvalReport r) {
        r.metric = metric;
        r.probe_id = name;
        r.layer = e->layer;
        r.checkpoint_words = e->checkpoint_words;
        rows.push_back({name, e->checkpoint_words, e->layer, metric, std::move(r)});
      };
      add("spearman", EvalDistanceProbe(w, h, gold, test, options));
      switch (config.task) {
        case StructureKind::kSyntax: {
          auto control = LinearTreeControl(w, h, loaded.sentences, test);
          add("spearman_linear", std::move(control.versus_linear));
          add("uuas", EvalUuas(w, h, gold, test));
          add("rank", EvalRankScore(w, h, gold, test));
          break;
        }
        case StructureKind::kSemantic:
          add("rank", EvalRankScore(w, h, gold, test));
          add("knn_f1", KnnReport(w, h, gold, *loaded.graph, split, knn_k, min_category));
          break;
        case StructureKind::kPhoneme:
          break;
      }
    }
  }

  auto depth = [&](int layer) { return layer_count > 1 ? static_cast<double>(layer) / (layer_count - 1) : 0.0; };

  CsvWriter sweep(provenance, {"probe", "checkpoint_words", "layer", "relative_depth", "metric", "score",
                               "groups", "excluded_groups"});
  for (const auto& r : rows) {
    sweep.Row({r.probe, CheckpointCell(r.checkpoint_words), std::to_string(r.layer), FormatDouble(depth(r.layer)),
               r.metric, FormatOptional(r.report.aggregate), std::to_string(r.report.group_scores.size()),
               std::to_string(r.report.excluded_groups)});
    const std::string name = r.probe + "_" + ArtifactStem(r.layer, r.checkpoint_words) + "_" + r.metric + ".json";
    WriteJson(config.out / "reports" / name, r.report.ToJson(), provenance);
  }
  WriteFileAtomic(config.out / "layer_sweep.csv", sweep.str());

  // Best layer per (probe, checkpoint, metric); rows are in layer order, so
  // strict improvement keeps the shallower layer on ties.
  std::map<std::tuple<std::string, int64_t, std::string>, const SweepRow*> best;
  std::vector<std::tuple<std::string, int64_t, std::string>> order;
  for (const auto& r : rows) {
    if (!r.report.aggregate) continue;
    const auto key = std::make_tuple(r.probe, r.checkpoint_words.value_or(-1), r.metric);
    auto it = best.find(key);
    if (it == best.end()) {
      best[key] = &r;
      order.push_back(key);
      continue;
    }
    const double cur = *it->second->report.aggregate, cand = *r.report.aggregate;
    const bool better = LowerIsBetter(r.metric) ? cand < cur : cand > cur;
    if (better || (cand == cur && r.layer < it->second->layer)) it->second = &r;
  }
  std::sort(order.begin(), order.end());
  CsvWriter summary(provenance, {"probe", "checkpoint_words", "metric", "best_layer", "relative_depth", "score"});
  for (const auto& key : order) {
    const SweepRow* r = best[key];
    summary.Row({r->probe, CheckpointCell(r->checkpoint_words), r->metric, std::to_string(r->layer),
                 FormatDouble(depth(r->layer)), FormatOptional(r->report.aggregate)});
  }
  WriteFileAtomic(config.out / "best_layers.csv", summary.str());

  out << "eval: " << rows.size() << " reports over " << usable.size() << " layers\n";
  return warnings ? kExitPartial : kExitOk;
}

}  // namespace geoprobe::cli
