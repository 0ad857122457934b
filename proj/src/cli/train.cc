#include <algorithm>
#include <atomic>
#include <ostream>
#include <thread>

#include "cli/commands.h"
#include "geoprobe/cli.h"
#include "geoprobe/random.h"

namespace geoprobe::cli {
namespace {

struct LayerOutcome {
  ManifestEntry entry;
  std::vector<std::vector<std::string>> grid_rows;
  std::string message;
};

struct TrainContext {
  const RunConfig* config;
  const GoldStructure* gold;
  const ElementSplit* split;
  const Provenance* provenance;
  TrainConfig base;
  bool grid = false;
  std::vector<double> learning_rates;
  int grid_jobs = 1;
};

std::vector<std::string> GridRow(const ManifestEntry& e, const nlohmann::json& g) {
  return {std::to_string(e.layer),
          e.checkpoint_words ? std::to_string(*e.checkpoint_words) : "",
          FormatDouble(g.at("learning_rate").get<double>()),
          g.at("error").get<std::string>().empty() ? FormatDouble(g.at("validation_score").get<double>()) : "",
          g.at("error").get<std::string>().empty() ? FormatDouble(g.at("validation_loss").get<double>()) : "",
          g.at("error").get<std::string>()};
}

// A finished sidecar from the same configuration and input; nullopt otherwise.
std::optional<nlohmann::json> CompletedSidecar(const RunConfig& config, const fs::path& sidecar,
                                               const fs::path& probe, const std::string& digest) {
  if (!fs::exists(sidecar) || !fs::exists(probe)) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(ReadFile(sidecar));
    if (j.value("run_hash", "") != config.hash || j.value("activation_digest", "") != digest)
      return std::nullopt;
    ReadTensor(probe);
    return j;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

LayerOutcome TrainLayer(const TrainContext& ctx, const fs::path& path) {
  const RunConfig& config = *ctx.config;
  LayerOutcome o;
  ManifestEntry& e = o.entry;
  e.activation = fs::absolute(path).lexically_normal().string();
  try {
    e.activation_digest = FileDigest(path);
    const ActivationMatrix acts = LoadActivations(config, path);
    e.layer = acts.layer_index;
    e.checkpoint_words = acts.checkpoint_words;
    const std::string stem = ArtifactStem(e.layer, e.checkpoint_words);
    e.probe = "probes/" + stem + ".act";
    e.sidecar = "probes/" + stem + ".json";
    const fs::path probe_path = config.out / e.probe;
    const fs::path sidecar_path = config.out / e.sidecar;

    if (config.flags.resume) {
      if (auto done = CompletedSidecar(config, sidecar_path, probe_path, e.activation_digest)) {
        if (done->contains("grid"))
          for (const auto& g : (*done)["grid"]) o.grid_rows.push_back(GridRow(e, g));
        e.status = "ok";
        o.message = stem + ": up to date, skipped";
        return o;
      }
    }

    const Eigen::MatrixXd h = AlignActivations(acts, *ctx.gold);
    TrainConfig cfg = ctx.base;
    cfg.probe_dim = std::min<int>(cfg.probe_dim, static_cast<int>(h.cols()));
    cfg.seed = MixSeed(config.seed, 100 + static_cast<uint64_t>(e.layer));

    nlohmann::json sidecar;
    TrainResult run;
    if (ctx.grid) {
      GridResult result = GridSearch(cfg, h, *ctx.gold, *ctx.split, ctx.learning_rates, ctx.grid_jobs);
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& g : result.entries)
        rows.push_back({{"learning_rate", g.learning_rate},
                        {"validation_score", g.validation_score},
                        {"validation_loss", g.validation_loss},
                        {"error", g.error}});
      for (const auto& g : rows) o.grid_rows.push_back(GridRow(e, g));
      sidecar["grid"] = rows;
      cfg = result.best_config;
      run = std::move(result.best_run);
    } else {
      run = TrainProbe(cfg, h, *ctx.gold, *ctx.split);
    }

    ActivationMatrix weights;
    weights.data = run.probe.weights.cast<float>();
    for (int u = 0; u < weights.data.rows(); ++u) weights.element_ids.push_back("u" + std::to_string(u));
    weights.layer_index = e.layer;
    weights.checkpoint_words = e.checkpoint_words;
    weights.source_model = "probe:" + ToString(config.task) + ":" + ToString(cfg.objective);
    WriteTensorAtomic(weights, probe_path);

    sidecar["layer"] = e.layer;
    sidecar["checkpoint_words"] = e.checkpoint_words ? nlohmann::json(*e.checkpoint_words) : nlohmann::json();
    sidecar["run_hash"] = config.hash;
    sidecar["activation_digest"] = e.activation_digest;
    sidecar["config"] = ToJson(cfg);
    sidecar["train_loss"] = run.train_loss;
    sidecar["validation_loss"] = run.validation_loss;
    sidecar["best_epoch"] = run.best_epoch;
    Provenance provenance = *ctx.provenance;
    provenance.AddDigest("activation:" + path.filename().string(), e.activation_digest);
    WriteJson(sidecar_path, sidecar, provenance);

    e.status = "ok";
    o.message = stem + ": trained, best epoch " + std::to_string(run.best_epoch) + ", lr " +
                FormatDouble(cfg.learning_rate);
  } catch (const std::exception& ex) {
    e.status = "failed";
    e.error = ex.what();
    o.message = path.filename().string() + ": failed: " + ex.what();
  }
  return o;
}

}  // namespace

int Train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const std::vector<fs::path> files = ActivationFiles(config);
  Provenance provenance(config);
  LoadedGold loaded = LoadGoldForActivations(config, files, provenance);
  const GoldStructure& gold = *loaded.gold;

  ElementSplit split;
  if (const auto split_path = config.Path("split")) {
    provenance.AddInput("split", config.RequirePath("split"));
    split = LoadSplit(*split_path, gold, config.seed);
  } else {
    split = MakeRandomSplit(gold, 0.1, 0.2, MixSeed(config.seed, 7));
  }

  TrainContext ctx;
  ctx.config = &config;
  ctx.gold = &gold;
  ctx.split = &split;
  ctx.provenance = &provenance;
  try {
    ctx.base = TrainConfigFromJson(config.Section("train"), TrainConfig::Preset(config.task, config.objective));
    ctx.base.objective = config.objective;
    ctx.base.Validate();
    const nlohmann::json& grid = config.Section("grid");
    ctx.grid = config.flags.grid || grid.value("enabled", false);
    ctx.learning_rates = LearningRateGrid(grid.value("count", 20), grid.value("lowest", 1e-7),
                                          grid.value("highest", 1e-2), grid.value("log", false));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (config.objective == Objective::kContrastive && !gold.HasTopology())
    throw InvalidArgument("the contrastive objective needs a structure with topology; " +
                          ToString(config.task) + " has none");

  fs::create_directories(config.out / "probes");
  WriteJson(config.out / "split.json", SplitToJson(split, gold), provenance);

  const int workers = std::max(1, std::min<int>(config.jobs, static_cast<int>(files.size())));
  ctx.grid_jobs = workers == 1 ? config.jobs : 1;
  std::vector<LayerOutcome> outcomes(files.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < files.size(); i = next++) outcomes[i] = TrainLayer(ctx, files[i]);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::stable_sort(outcomes.begin(), outcomes.end(), [](const LayerOutcome& a, const LayerOutcome& b) {
    const auto key = [](const ManifestEntry& e) {
      return std::make_tuple(e.layer < 0, e.checkpoint_words.value_or(-1), e.layer);
    };
    return key(a.entry) < key(b.entry);
  });

  Manifest manifest;
  manifest.task = config.task;
  manifest.objective = config.objective;
  for (const auto& o : outcomes)
    provenance.AddDigest("activation:" + fs::path(o.entry.activation).filename().string(),
                         o.entry.activation_digest);
  CsvWriter grid_csv(provenance, {"layer", "checkpoint_words", "learning_rate", "validation_score",
                                  "validation_loss", "error"});
  int failures = 0;
  for (const auto& o : outcomes) {
    for (const auto& row : o.grid_rows) grid_csv.Row(row);
    (o.entry.status == "ok" ? out : err) << "train: " << o.message << "\n";
    failures += o.entry.status != "ok";
    manifest.entries.push_back(o.entry);
  }
  if (ctx.grid) WriteFileAtomic(config.out / "grid.csv", grid_csv.str());
  WriteJson(config.out / "manifest.json", manifest.ToJson(), provenance);

  out << "train: " << (files.size() - failures) << " of " << files.size() << " layers trained\n";
  return failures ? kExitPartial : kExitOk;
}

}  // namespace geoprobe::cli
