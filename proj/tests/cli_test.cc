#include <cmath>
#include <set>

#include <doctest.h>

#include "cli/common.h"
#include "cli_fixtures.h"
#include "fixtures.h"
#include "geoprobe/random.h"

namespace geoprobe {
namespace {

namespace fs = std::filesystem;
using cli::ReadCsv;
using testing::CountOccurrences;
using testing::ReadText;
using testing::RunTool;
using testing::Snapshot;
using testing::TempDir;
using testing::WriteActivations;
using testing::WriteConfig;
using testing::WriteProbe;
using testing::WriteText;

using Rows = std::vector<std::map<std::string, std::string>>;

Rows Select(const Rows& rows, const std::map<std::string, std::string>& where) {
  Rows out;
  for (const auto& r : rows) {
    bool keep = true;
    for (const auto& [k, v] : where) keep &= r.at(k) == v;
    if (keep) out.push_back(r);
  }
  return out;
}

// Planted syntax activations over `layers` files with growing noise.
testing::PlantedFixture WriteSyntaxInputs(const TempDir& dir, int layers, bool exact = false) {
  testing::PlantedOptions o;
  o.elements = 120;
  o.k = 12;
  o.p = 4;
  o.max_words = 5;
  o.noise = exact ? 0.0 : 0.05;
  o.rotate = !exact;
  const auto f = testing::MakePlantedFixture(o, 5);
  WriteText(dir / "gold.conllu", testing::ToConllu(f.sentences));
  const auto ids = f.Gold()->element_ids();
  Rng rng(9);
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd h = f.h;
    if (l > 0)
      for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] += 0.05 * l * rng.Normal();
    WriteActivations(dir / ("acts/layer" + std::to_string(l) + ".act"), h, ids, l);
  }
  return f;
}

nlohmann::json SyntaxConfig(const std::string& objective = "distance") {
  return {{"task", "syntax"},
          {"objective", objective},
          {"activations", "acts/layer*.act"},
          {"gold", {{"conllu", "gold.conllu"}}},
          {"train", {{"epochs", 3}, {"probe_dim", 4}, {"sets_per_batch", 10}, {"learning_rate", 5e-3}}},
          {"grid", {{"count", 20}}},
          {"out", "run"},
          {"seed", 1}};
}

std::string Config(const TempDir& dir, const nlohmann::json& j, const std::string& name = "config.json") {
  return WriteConfig(dir / name, j).string();
}

TEST_CASE("train writes one probe per layer and a manifest") {
  TempDir dir;
  WriteSyntaxInputs(dir, 3);
  const auto cfg = Config(dir, SyntaxConfig());
  const auto r = RunTool({"train", "--config", cfg});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  for (int l = 0; l < 3; ++l) {
    const auto probe = ReadTensor(dir / ("run/probes/L00" + std::to_string(l) + "_Cnone.act"));
    CHECK(probe.rows() == 12);
    CHECK(probe.cols() == 4);
    CHECK(probe.layer_index == l);
  }
  const auto manifest = cli::ReadManifest(dir / "run/manifest.json");
  REQUIRE(manifest.entries.size() == 3);
  for (const auto& e : manifest.entries) CHECK(e.status == "ok");
  const auto j = nlohmann::json::parse(ReadText(dir / "run/manifest.json"));
  CHECK(j["provenance"]["toolkit"] == std::string("geoprobe ") + kToolkitVersion);
  CHECK(j["provenance"]["inputs"].contains("conllu"));
  CHECK(ReadText(dir / "run/split.json").find("\"validation\"") != std::string::npos);
}

TEST_CASE("train --grid reports twenty learning rates per layer") {
  TempDir dir;
  WriteSyntaxInputs(dir, 2);
  auto j = SyntaxConfig();
  j["train"]["epochs"] = 1;
  const auto r = RunTool({"train", "--config", Config(dir, j), "--grid"});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto rows = ReadCsv(dir / "run/grid.csv");
  CHECK(Select(rows, {{"layer", "0"}}).size() == 20);
  CHECK(Select(rows, {{"layer", "1"}}).size() == 20);
  CHECK(ReadText(dir / "run/grid.csv").rfind("# toolkit: geoprobe", 0) == 0);
}

TEST_CASE("train --resume skips finished layers") {
  TempDir dir;
  WriteSyntaxInputs(dir, 3);
  const auto cfg = Config(dir, SyntaxConfig());
  REQUIRE(RunTool({"train", "--config", cfg}).code == kExitOk);
  const auto before = Snapshot(dir / "run");

  // Simulate an interruption that lost layer 1.
  fs::remove(dir / "run/probes/L001_Cnone.act");
  fs::remove(dir / "run/probes/L001_Cnone.json");
  const auto r = RunTool({"train", "--config", cfg, "--resume"});
  REQUIRE(r.code == kExitOk);
  CHECK(CountOccurrences(r.out, "skipped") == 2);
  CHECK(CountOccurrences(r.out, "trained, best epoch") == 1);
  CHECK(Snapshot(dir / "run") == before);

  // A changed config invalidates the finished layers.
  auto j = SyntaxConfig();
  j["train"]["epochs"] = 2;
  const auto changed = RunTool({"train", "--config", Config(dir, j), "--resume"});
  CHECK(CountOccurrences(changed.out, "skipped") == 0);
}

TEST_CASE("a broken layer does not stop the others") {
  TempDir dir;
  WriteSyntaxInputs(dir, 2);
  WriteText(dir / "acts/layer9.act", "not a tensor");
  const auto r = RunTool({"train", "--config", Config(dir, SyntaxConfig())});
  CHECK(r.code == kExitPartial);
  CHECK(r.err.find("layer9.act") != std::string::npos);
  const auto manifest = cli::ReadManifest(dir / "run/manifest.json");
  REQUIRE(manifest.entries.size() == 3);
  CHECK(manifest.entries[0].status == "ok");
  CHECK(manifest.entries[1].status == "ok");
  CHECK(manifest.entries[2].status == "failed");

  // eval skips the failed entry with a warning.
  const auto e = RunTool({"eval", "--config", (dir / "config.json").string()});
  CHECK(e.code == kExitPartial);
  CHECK(e.err.find("warning") != std::string::npos);
  CHECK(fs::exists(dir / "run/layer_sweep.csv"));
}

TEST_CASE("config validation errors exit with 1") {
  TempDir dir;
  WriteSyntaxInputs(dir, 1);
  auto j = SyntaxConfig();
  j["gold"] = nlohmann::json::object();
  auto r = RunTool({"train", "--config", Config(dir, j)});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("gold.conllu") != std::string::npos);
  j = SyntaxConfig();
  j["activations"] = "acts/none*.act";
  CHECK(RunTool({"train", "--config", Config(dir, j)}).code == kExitInvalid);
  j = SyntaxConfig();
  j["task"] = "morphology";
  CHECK(RunTool({"train", "--config", Config(dir, j)}).code == kExitInvalid);
  CHECK(RunTool({"train"}).code == kExitInvalid);
  CHECK(RunTool({"frobnicate", "--config", "x"}).code == kExitInvalid);
  CHECK(RunTool({"eval", "--config", Config(dir, SyntaxConfig())}).code == kExitInvalid);  // no manifest yet
}

TEST_CASE("eval of a perfect probe gives score 1 rows and best layers") {
  TempDir dir;
  const auto f = WriteSyntaxInputs(dir, 2, /*exact=*/true);
  auto j = SyntaxConfig();
  j["train"]["epochs"] = 1;
  const auto cfg = Config(dir, j);
  REQUIRE(RunTool({"train", "--config", cfg}).code == kExitOk);
  // Layer 0 is noiseless, so its planted basis is a perfect probe.
  WriteProbe(dir / "run/probes/L000_Cnone.act", f.basis, 0);

  const auto r = RunTool({"eval", "--config", cfg, "--baseline"});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto rows = ReadCsv(dir / "run/layer_sweep.csv");
  const auto perfect = Select(rows, {{"probe", "trained"}, {"layer", "0"}});
  REQUIRE(perfect.size() == 4);
  CHECK(std::stod(Select(perfect, {{"metric", "spearman"}})[0].at("score")) == 1.0);
  CHECK(std::stod(Select(perfect, {{"metric", "uuas"}})[0].at("score")) == 1.0);
  CHECK(Select(perfect, {{"metric", "spearman"}})[0].at("relative_depth") == "0");

  // Random-projection baseline rows for every layer and metric.
  CHECK(Select(rows, {{"probe", "random"}}).size() == 8);
  CHECK(Select(rows, {{"probe", "trained"}}).size() == 8);

  const auto best = ReadCsv(dir / "run/best_layers.csv");
  const auto spearman = Select(best, {{"probe", "trained"}, {"metric", "spearman"}});
  REQUIRE(spearman.size() == 1);
  CHECK(spearman[0].at("best_layer") == "0");
  CHECK(fs::exists(dir / "run/reports/trained_L001_Cnone_uuas.json"));
}

TEST_CASE("contrastive syntax runs report rank and UUAS") {
  TempDir dir;
  WriteSyntaxInputs(dir, 1);
  auto j = SyntaxConfig("contrastive");
  j["train"] = {{"epochs", 2}, {"probe_dim", 4}, {"sets_per_batch", 10}, {"learning_rate", 5e-3}};
  const auto cfg = Config(dir, j);
  REQUIRE(RunTool({"train", "--config", cfg}).code == kExitOk);
  REQUIRE(RunTool({"eval", "--config", cfg}).code == kExitOk);
  const auto rows = ReadCsv(dir / "run/layer_sweep.csv");
  std::set<std::string> metrics;
  for (const auto& r : rows) metrics.insert(r.at("metric"));
  CHECK(metrics.count("rank"));
  CHECK(metrics.count("uuas"));
  CHECK_FALSE(Select(rows, {{"metric", "rank"}})[0].at("score").empty());
}

TEST_CASE("train and eval reruns are byte-identical and independent of --jobs") {
  TempDir dir;
  WriteSyntaxInputs(dir, 3);
  const auto cfg = Config(dir, SyntaxConfig());
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(RunTool({"train", "--config", cfg, "--out", a}).code == kExitOk);
  REQUIRE(RunTool({"eval", "--config", cfg, "--out", a, "--baseline"}).code == kExitOk);
  REQUIRE(RunTool({"train", "--config", cfg, "--out", b, "--jobs", "3"}).code == kExitOk);
  REQUIRE(RunTool({"eval", "--config", cfg, "--out", b, "--baseline"}).code == kExitOk);
  const auto sa = Snapshot(a), sb = Snapshot(b);
  CHECK(sa.size() > 10);
  CHECK(sa == sb);
}

// Logistic scores with a given midpoint at half-decade checkpoints, two layers.
void WriteSweep(const fs::path& path, double mu, int checkpoints = 13) {
  std::string text = "probe,checkpoint_words,layer,relative_depth,metric,score,groups,excluded_groups\n";
  for (int i = 0; i < checkpoints; ++i) {
    const double x = 5.0 + 0.5 * i;
    const double s = 0.1 + 0.8 / (1.0 + std::exp(-(x - mu) / 0.4));
    const std::string words = std::to_string(static_cast<int64_t>(std::llround(std::pow(10.0, x))));
    text += "trained," + words + ",0,0,spearman," + cli::FormatDouble(s - 0.05) + ",10,0\n";
    text += "trained," + words + ",1,1,spearman," + cli::FormatDouble(s) + ",10,0\n";
    text += "random," + words + ",1,1,spearman,0.01,10,0\n";
  }
  WriteText(path, text);
}

TEST_CASE("emergence recovers the structure ordering") {
  TempDir dir;
  WriteSweep(dir / "syntax.csv", 9.0);
  WriteSweep(dir / "phoneme.csv", 7.0);
  WriteSweep(dir / "semantic.csv", 8.0);
  const auto cfg = Config(dir, {{"emergence",
                                 {{"structures",
                                   {{"syntax", "syntax.csv"}, {"phoneme", "phoneme.csv"}, {"semantic", "semantic.csv"}}}}},
                                {"out", "em"}});
  const auto r = RunTool({"emergence", "--config", cfg});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto j = nlohmann::json::parse(ReadText(dir / "em/emergence.json"));
  CHECK(j["ordering"] == nlohmann::json({"phoneme", "semantic", "syntax"}));
  CHECK(j["child_words"].get<double>() == 1e7);
  CHECK(j["structures"]["semantic"]["midpoint_log10_words"].get<double>() == doctest::Approx(8.0).epsilon(0.01));
  CHECK(j["structures"]["syntax"]["data_gap"].get<double>() == doctest::Approx(2.0).epsilon(0.01));
  const auto grid = ReadCsv(dir / "em/relative_scores.csv");
  CHECK(grid.size() == 101);
  CHECK(std::stod(grid.front().at("phoneme")) == doctest::Approx(0.0));
  CHECK(std::stod(grid.back().at("phoneme")) == doctest::Approx(1.0));
}

TEST_CASE("emergence refuses too few checkpoints") {
  TempDir dir;
  WriteSweep(dir / "syntax.csv", 9.0, 1);
  const auto cfg = Config(dir, {{"emergence", {{"structures", {{"syntax", "syntax.csv"}}}}}, {"out", "em"}});
  const auto r = RunTool({"emergence", "--config", cfg});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("at least 4") != std::string::npos);
  CHECK(r.err.find("more training checkpoints") != std::string::npos);
}

TEST_CASE("emergence flags flat curves") {
  TempDir dir;
  std::string text = "probe,checkpoint_words,layer,relative_depth,metric,score,groups,excluded_groups\n";
  for (int i = 0; i < 6; ++i) text += "trained," + std::to_string(100000 * (i + 1)) + ",0,0,spearman,0.5,1,0\n";
  WriteText(dir / "flat.csv", text);
  const auto cfg = Config(dir, {{"emergence", {{"structures", {{"flat", "flat.csv"}}}}}, {"out", "em"}});
  const auto r = RunTool({"emergence", "--config", cfg});
  CHECK(r.code == kExitOk);
  CHECK(nlohmann::json::parse(ReadText(dir / "em/emergence.json"))["structures"]["flat"]["degenerate"] == true);
}

// Four planted clusters at the corners of a trapezoid in a 2-unit space.
struct Trapezoid {
  std::vector<std::pair<std::string, Eigen::Vector2d>> corners = {
      {"bl", {0, 0}}, {"br", {4, 0}}, {"tl", {1, 2}}, {"tr", {3, 2}}};
};

TEST_CASE("visualize places category centroids at the planted corners") {
  TempDir dir;
  Trapezoid t;
  Rng rng(3);
  Eigen::MatrixXd h(40, 2);
  std::vector<std::string> ids;
  std::string categories;
  for (int i = 0; i < 40; ++i) {
    const auto& [name, corner] = t.corners[i % 4];
    h.row(i) << corner(0) + 0.05 * rng.Normal(), corner(1) + 0.05 * rng.Normal();
    ids.push_back("e" + std::to_string(i));
    categories += name + "\t" + ids.back() + "\n";
  }
  WriteActivations(dir / "acts.act", h, ids, 0);
  WriteProbe(dir / "probe.act", Eigen::Matrix2d::Identity(), 0);
  WriteText(dir / "categories.tsv", categories);
  const auto cfg = Config(dir, {{"visualize", {{"probe", "probe.act"}, {"activations", "acts.act"},
                                               {"categories", "categories.tsv"}}},
                                {"out", "vis"}});
  const auto r = RunTool({"visualize", "--config", cfg});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto centroids = ReadCsv(dir / "vis/centroids.csv");
  REQUIRE(centroids.size() == 4);
  for (const auto& [name, corner] : t.corners) {
    const auto row = Select(centroids, {{"category", name}});
    REQUIRE(row.size() == 1);
    CHECK(std::abs(std::stod(row[0].at("x")) - corner(0)) < 0.1);
    CHECK(std::abs(std::stod(row[0].at("y")) - corner(1)) < 0.1);
  }
  const std::string svg = ReadText(dir / "vis/projection.svg");
  CHECK(CountOccurrences(svg, "class=\"centroid\"") == 4);
  CHECK(CountOccurrences(svg, "class=\"point\"") == 40);
  // On the canvas the bottom corners sit below (larger y) and the right ones
  // to the right of their counterparts.
  auto diamond = [&](const std::string& name) {
    const auto at = svg.find("data-category=\"" + name + "\" points=\"");
    const auto start = svg.find("points=\"", at) + 8;
    const double x = std::stod(svg.substr(start));
    const double y = std::stod(svg.substr(svg.find(',', start) + 1)) + 7;
    return Eigen::Vector2d(x, y);
  };
  CHECK(diamond("bl").y() > diamond("tl").y() + 100);
  CHECK(diamond("br").x() > diamond("tr").x() + 50);
  CHECK(diamond("tr").x() > diamond("tl").x() + 100);
  CHECK(std::abs(diamond("bl").y() - diamond("br").y()) < 10);

  // Same inputs, same bytes.
  const auto again = RunTool({"visualize", "--config", cfg, "--out", (dir / "vis2").string()});
  REQUIRE(again.code == kExitOk);
  CHECK(ReadText(dir / "vis2/projection.svg") == svg);
}

TEST_CASE("visualize --tree draws n-1 edges and checks the probe dimension") {
  TempDir dir;
  Eigen::MatrixXd h(5, 3);
  h << 0, 0, 1, 1, 0, 1, 2, 1, 1, 3, 0, 1, 1, 2, 1;
  std::vector<std::string> ids;
  for (int i = 1; i <= 5; ++i) ids.push_back(SyntaxElementId("s7", i));
  WriteActivations(dir / "acts.act", h, ids, 0);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3, 2);
  b(0, 0) = b(1, 1) = 1;
  WriteProbe(dir / "probe.act", b, 0);
  const auto cfg = Config(dir, {{"visualize", {{"probe", "probe.act"}, {"activations", "acts.act"},
                                               {"sentence", "s7"}}},
                                {"out", "vis"}});
  const auto r = RunTool({"visualize", "--config", cfg, "--tree"});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(CountOccurrences(ReadText(dir / "vis/projection.svg"), "class=\"tree-edge\"") == 4);

  WriteProbe(dir / "probe.act", Eigen::MatrixXd::Identity(3, 3), 0);
  const auto bad = RunTool({"visualize", "--config", cfg});
  CHECK(bad.code == kExitInvalid);
  CHECK(bad.err.find("2-dimensional") != std::string::npos);
}

void WriteManifest(const fs::path& path, const std::string& task, const std::vector<int>& layers) {
  nlohmann::json entries = nlohmann::json::array();
  for (int l : layers)
    entries.push_back({{"layer", l},
                       {"checkpoint_words", nullptr},
                       {"activation", "unused"},
                       {"activation_digest", ""},
                       {"status", "ok"},
                       {"probe", "L" + std::to_string(l) + ".act"},
                       {"sidecar", ""}});
  WriteText(path, nlohmann::json({{"task", task}, {"objective", "distance"}, {"entries", entries}}).dump());
}

TEST_CASE("analyze: identical probes align perfectly; layer mismatch is an error") {
  TempDir dir;
  Rng rng(4);
  for (int l = 0; l < 3; ++l) {
    Eigen::MatrixXd b(10, 3);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.Normal();
    WriteProbe(dir / ("sem/L" + std::to_string(l) + ".act"), b, l);
  }
  WriteManifest(dir / "sem/manifest.json", "semantic", {0, 1, 2});
  const auto cfg = Config(dir, {{"analyze", {{"semantic", "sem/manifest.json"}, {"syntax", "sem/manifest.json"}}},
                                {"out", "an"}});
  const auto r = RunTool({"analyze", "--config", cfg});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("encoding section omitted") != std::string::npos);
  const auto rows = ReadCsv(dir / "an/alignment.csv");
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) CHECK(std::stod(row.at("alignment")) == doctest::Approx(1.0).epsilon(1e-9));

  fs::create_directories(dir / "syn");
  fs::copy_file(dir / "sem/L0.act", dir / "syn/L0.act");
  WriteManifest(dir / "syn/manifest.json", "syntax", {0});
  const auto cfg2 = Config(dir, {{"analyze", {{"semantic", "sem/manifest.json"}, {"syntax", "syn/manifest.json"}}},
                                 {"out", "an2"}},
                           "config2.json");
  const auto mismatch = RunTool({"analyze", "--config", cfg2});
  CHECK(mismatch.code == kExitInvalid);
  CHECK(mismatch.err.find("only semantic: layer 1, layer 2") != std::string::npos);
}

TEST_CASE("analyze flags planted syntax units and partitions their variance") {
  TempDir dir;
  Rng rng(6);
  const int n = 200, k = 12;
  // Units 0 and 1 carry the syntactic coordinates; the syntax probe reads
  // them with weight 5 and every other unit with a unit-norm row.
  Eigen::MatrixXd h(n, k);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.Normal();
  auto unit_rows = [&](Eigen::MatrixXd& b, int from) {
    for (int u = from; u < k; ++u) {
      const double angle = rng.Uniform(0, 6.283185307179586);
      b.row(u) << std::cos(angle), std::sin(angle);
    }
  };
  Eigen::MatrixXd syn = Eigen::MatrixXd::Zero(k, 2);
  syn(0, 0) = syn(1, 1) = 5;
  unit_rows(syn, 2);
  Eigen::MatrixXd sem = Eigen::MatrixXd::Zero(k, 2);
  unit_rows(sem, 0);
  sem.row(0) *= 0.01;
  sem.row(1) *= 0.01;
  WriteProbe(dir / "sem/L0.act", sem, 0);
  WriteProbe(dir / "syn/L0.act", syn, 0);
  WriteManifest(dir / "sem/manifest.json", "semantic", {0});
  WriteManifest(dir / "syn/manifest.json", "syntax", {0});
  std::vector<std::string> ids;
  std::string univariate = "element,frequency,length\n";
  for (int i = 0; i < n; ++i) {
    ids.push_back("w" + std::to_string(i));
    univariate += ids.back() + "," + cli::FormatDouble(rng.Normal()) + "," + cli::FormatDouble(rng.Normal()) + "\n";
  }
  WriteActivations(dir / "enc/L0.act", h, ids, 0);

  nlohmann::json analyze = {{"semantic", "sem/manifest.json"},
                            {"syntax", "syn/manifest.json"},
                            {"encoding", {{"activations", "enc/L*.act"}, {"univariate", "missing.csv"}}}};
  const auto cfg = Config(dir, {{"analyze", analyze}, {"out", "an"}});
  const auto r = RunTool({"analyze", "--config", cfg});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("delta R2 section omitted") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "an/delta_r2.csv"));

  const auto norms = ReadCsv(dir / "an/norms.csv");
  std::set<std::string> flagged;
  for (const auto& row : norms)
    if (row.at("syntax_outlier") == "1") flagged.insert(row.at("unit"));
  CHECK(flagged == std::set<std::string>{"0", "1"});
  const auto encoding = ReadCsv(dir / "an/encoding.csv");
  REQUIRE(encoding.size() == static_cast<size_t>(k));
  for (const char* u : {"0", "1"}) {
    const auto row = Select(encoding, {{"unit", u}})[0];
    CHECK(std::stod(row.at("r2_syntax")) > 0.8);
    CHECK(std::abs(std::stod(row.at("r2_semantic"))) < 0.1);
  }

  WriteText(dir / "univariate.csv", univariate);
  analyze["encoding"]["univariate"] = "univariate.csv";
  const auto with_table = RunTool({"analyze", "--config", Config(dir, {{"analyze", analyze}, {"out", "an"}})});
  REQUIRE(with_table.code == kExitOk);
  const auto delta = ReadCsv(dir / "an/delta_r2.csv");
  REQUIRE(delta.size() == 1);
  CHECK(std::stod(delta[0].at("mean_delta_r2")) > 0.1);
}

// Root with four branches of thirty leaves, one unique lemma per synset.
void WriteLexicon(const TempDir& dir) {
  std::string graph;
  nlohmann::json synsets = {{"entity.n.01", {"entity"}}};
  for (int m = 0; m < 4; ++m) {
    const std::string mid = "group" + std::to_string(m) + ".n.01";
    graph += mid + "\tentity.n.01\n";
    synsets[mid] = {"group" + std::to_string(m)};
    for (int l = 0; l < 30; ++l) {
      const std::string leaf = "thing" + std::to_string(m) + "_" + std::to_string(l) + ".n.01";
      graph += leaf + "\t" + mid + "\n";
      synsets[leaf] = {"thing" + std::to_string(m) + "_" + std::to_string(l)};
    }
  }
  synsets["group0.n.01"].push_back("thing0_0");  // shared lemma, released
  WriteText(dir / "graph.tsv", graph);
  WriteText(dir / "lexicon.json", nlohmann::json({{"synsets", synsets}, {"frequencies", nlohmann::json::object()}}).dump());
}

TEST_CASE("build-dataset writes a balanced split deterministically") {
  TempDir dir;
  WriteLexicon(dir);
  const nlohmann::json j = {{"dataset", {{"lexicon", "lexicon.json"}, {"graph", "graph.tsv"}, {"iterations", 200000}}},
                            {"out", "ds"},
                            {"seed", 2}};
  const auto cfg = Config(dir, j);
  const auto r = RunTool({"build-dataset", "--config", cfg});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto pairs = ReadCsv(dir / "ds/pairs.csv");
  CHECK(pairs.size() == 125);
  CHECK(Select(pairs, {{"synset", "group0.n.01"}})[0].at("lemma") == "group0");
  const auto fractions = ReadCsv(dir / "ds/category_fractions.csv");
  CHECK(fractions.size() == 5);
  for (const auto& row : fractions)
    if (std::stoi(row.at("size")) >= 20) CHECK(std::abs(std::stod(row.at("test_fraction")) - 0.2) <= 0.05);
  const auto again = RunTool({"build-dataset", "--config", cfg, "--out", (dir / "ds2").string()});
  REQUIRE(again.code == kExitOk);
  CHECK(Snapshot(dir / "ds") == Snapshot(dir / "ds2"));
}

TEST_CASE("semantic runs train on a built split and report KNN-f1") {
  TempDir dir;
  WriteLexicon(dir);
  const auto ds = Config(dir, {{"dataset", {{"lexicon", "lexicon.json"}, {"graph", "graph.tsv"}, {"iterations", 50000}}},
                               {"out", "ds"}},
                         "dataset.json");
  REQUIRE(RunTool({"build-dataset", "--config", ds}).code == kExitOk);
  std::vector<std::string> ids;
  for (const auto& row : ReadCsv(dir / "ds/pairs.csv")) ids.push_back(row.at("synset"));
  Rng rng(8);
  Eigen::MatrixXd h(ids.size(), 8);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.Normal();
  WriteActivations(dir / "acts/L0.act", h, ids, 0);
  const auto cfg = Config(dir, {{"task", "semantic"},
                                {"objective", "distance"},
                                {"activations", "acts/L*.act"},
                                {"gold", {{"graph", "graph.tsv"}}},
                                {"split", "ds/split.json"},
                                {"train", {{"epochs", 2}, {"probe_dim", 4}, {"sets_per_batch", 5}}},
                                {"eval", {{"min_category_size", 5}}},
                                {"out", "run"}});
  const auto t = RunTool({"train", "--config", cfg});
  INFO(t.err);
  REQUIRE(t.code == kExitOk);
  const auto e = RunTool({"eval", "--config", cfg});
  INFO(e.err);
  REQUIRE(e.code == kExitOk);
  const auto rows = ReadCsv(dir / "run/layer_sweep.csv");
  std::set<std::string> metrics;
  for (const auto& r : rows) metrics.insert(r.at("metric"));
  CHECK(metrics == std::set<std::string>{"knn_f1", "rank", "spearman"});
}

TEST_CASE("phoneme runs use span labels; contrastive needs topology") {
  TempDir dir;
  WriteText(dir / "features.csv", "symbol,voice,nasal,labial\np,-1,-1,1\nb,1,-1,1\nm,1,1,1\nt,-1,-1,-1\n");
  const std::vector<std::string> symbols = {"p", "b", "m", "t"};
  std::string spans;
  std::vector<std::string> ids;
  Rng rng(2);
  Eigen::MatrixXd h(80, 6);
  for (int i = 0; i < 80; ++i) {
    ids.push_back("t" + std::to_string(i));
    const std::string& s = symbols[i % 4];
    spans += nlohmann::json({{"utterance_id", "u" + std::to_string(i / 10)},
                             {"element_id", ids.back()},
                             {"start", i % 10},
                             {"end", i % 10 + 1},
                             {"label", s}})
                 .dump() +
             "\n";
    for (int c = 0; c < 6; ++c) h(i, c) = rng.Normal() + (c == i % 4 ? 3.0 : 0.0);
  }
  WriteText(dir / "spans.jsonl", spans);
  WriteActivations(dir / "acts/L0.act", h, ids, 0);
  nlohmann::json j = {{"task", "phoneme"},
                      {"objective", "distance"},
                      {"activations", "acts/L*.act"},
                      {"gold", {{"features", "features.csv"}, {"spans", "spans.jsonl"}}},
                      {"train", {{"epochs", 3}, {"probe_dim", 3}, {"set_size", 20}, {"learning_rate", 1e-2}}},
                      {"out", "run"}};
  const auto cfg = Config(dir, j);
  const auto t = RunTool({"train", "--config", cfg});
  INFO(t.err);
  REQUIRE(t.code == kExitOk);
  REQUIRE(RunTool({"eval", "--config", cfg}).code == kExitOk);
  const auto rows = ReadCsv(dir / "run/layer_sweep.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].at("metric") == "spearman");

  j["objective"] = "contrastive";
  const auto c = RunTool({"train", "--config", Config(dir, j)});
  CHECK(c.code == kExitInvalid);
  CHECK(c.err.find("topology") != std::string::npos);
}

}  // namespace
}  // namespace geoprobe
