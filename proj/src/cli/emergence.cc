#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "cli/commands.h"
#include "geoprobe/analysis.h"
#include "geoprobe/cli.h"
#include "geoprobe/random.h"

namespace geoprobe::cli {
namespace {

constexpr int kMinCheckpoints = 4;

// Best score across layers at each checkpoint.
std::vector<CurvePoint> CheckpointMaxima(const fs::path& sweep, const std::string& probe,
                                         const std::string& metric) {
  std::map<int64_t, double> best;
  for (const auto& row : ReadCsv(sweep)) {
    if (row.at("probe") != probe || row.at("metric") != metric) continue;
    const std::string& words = row.at("checkpoint_words");
    const std::string& score = row.at("score");
    if (words.empty() || score.empty()) continue;
    const int64_t w = std::stoll(words);
    const double s = std::stod(score);
    auto [it, inserted] = best.emplace(w, s);
    if (!inserted) it->second = std::max(it->second, s);
  }
  std::vector<CurvePoint> points;
  for (const auto& [w, s] : best) points.push_back({static_cast<double>(w), s});
  return points;
}

}  // namespace

int Emergence(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const nlohmann::json& section = config.Section("emergence");
  if (!section.contains("structures") || !section["structures"].is_object() || section["structures"].empty())
    throw InvalidArgument("emergence needs \"emergence.structures\": {name: layer_sweep.csv, ...}");
  const std::string metric = section.value("metric", "spearman");
  const std::string probe = section.value("probe", "trained");
  const double child_words = section.value("child_words", 1e7);
  const int grid_points = section.value("grid_points", 101);
  if (child_words <= 0) throw InvalidArgument("emergence.child_words must be positive");
  if (grid_points < 2) throw InvalidArgument("emergence.grid_points must be at least 2");

  Provenance provenance(config);
  std::vector<std::pair<std::string, EmergenceCurve>> curves;
  for (const auto& [name, value] : section["structures"].items()) {
    const fs::path sweep = config.RequirePath("emergence.structures." + name);
    provenance.AddInput(name, sweep);
    auto points = CheckpointMaxima(sweep, probe, metric);
    if (points.size() < static_cast<size_t>(kMinCheckpoints))
      throw InvalidArgument("structure '" + name + "' has " + std::to_string(points.size()) +
                            " checkpoint(s) with '" + metric + "' scores; fitting an emergence curve needs at least " +
                            std::to_string(kMinCheckpoints) +
                            ". Extract activations at more training checkpoints and rerun train and eval.");
    FitOptions options;
    options.seed = MixSeed(config.seed, curves.size());
    curves.emplace_back(name, FitEmergence(std::move(points), options));
  }

  nlohmann::json structures = nlohmann::json::object();
  std::vector<std::pair<double, std::string>> ordering;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [name, curve] : curves) {
    lo = std::min(lo, curve.min_log_words);
    hi = std::max(hi, curve.max_log_words);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : curve.points) points.push_back({{"words", p.words}, {"score", p.score}});
    nlohmann::json j = {{"points", points}, {"degenerate", curve.degenerate}};
    if (curve.degenerate) {
      err << "warning: " << name << ": scores are flat, no emergence curve fitted\n";
    } else {
      const EmergencePoint point = EmergencePointAt(curve);
      j["floor"] = curve.params.floor;
      j["ceiling"] = curve.params.ceiling;
      j["midpoint_log10_words"] = curve.params.midpoint;
      j["slope"] = curve.params.slope;
      j["residual"] = curve.residual;
      j["emergence_words"] = point.words;
      j["extrapolated"] = point.extrapolated;
      j["data_gap"] = DataGap(point.words, child_words);
      ordering.emplace_back(curve.params.midpoint, name);
    }
    structures[name] = j;
  }
  std::sort(ordering.begin(), ordering.end());
  nlohmann::json order = nlohmann::json::array();
  for (const auto& [mu, name] : ordering) order.push_back(name);
  WriteJson(config.out / "emergence.json",
            {{"metric", metric}, {"probe", probe}, {"child_words", child_words}, {"structures", structures},
             {"ordering", order}},
            provenance);

  std::vector<double> grid(grid_points);
  for (int i = 0; i < grid_points; ++i) grid[i] = lo + (hi - lo) * i / (grid_points - 1);
  std::vector<std::string> columns = {"log10_words"};
  std::vector<std::vector<double>> relative;
  for (const auto& [name, curve] : curves) {
    columns.push_back(name);
    std::vector<double> r;
    if (!curve.degenerate) {
      try {
        r = RelativeScores(curve, grid);
      } catch (const InvalidArgument& e) {
        err << "warning: " << name << ": " << e.what() << "\n";
      }
    }
    relative.push_back(std::move(r));
  }
  CsvWriter csv(provenance, columns);
  for (int i = 0; i < grid_points; ++i) {
    std::vector<std::string> row = {FormatDouble(grid[i])};
    for (const auto& r : relative) row.push_back(r.empty() ? "" : FormatDouble(r[i]));
    csv.Row(row);
  }
  WriteFileAtomic(config.out / "relative_scores.csv", csv.str());

  out << "emergence: " << curves.size() << " structures, order";
  for (const auto& [mu, name] : ordering) out << " " << name;
  out << "\n";
  return kExitOk;
}

}  // namespace geoprobe::cli
