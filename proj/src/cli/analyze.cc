#include <algorithm>
#include <map>
#include <ostream>
#include <set>

#include "cli/commands.h"
#include "geoprobe/analysis.h"
#include "geoprobe/cli.h"

namespace geoprobe::cli {
namespace {

using LayerKey = std::pair<int64_t, int>;  // (checkpoint or -1, layer)

LayerKey KeyOf(const std::optional<int64_t>& checkpoint, int layer) { return {checkpoint.value_or(-1), layer}; }

std::string CheckpointCell(int64_t c) { return c < 0 ? "" : std::to_string(c); }

std::map<LayerKey, fs::path> ProbesByLayer(const Manifest& m) {
  std::map<LayerKey, fs::path> out;
  for (const auto& e : m.entries)
    if (e.status == "ok") out[KeyOf(e.checkpoint_words, e.layer)] = m.dir / e.probe;
  return out;
}

std::string DescribeKeys(const std::vector<LayerKey>& keys) {
  std::string s;
  for (const auto& [c, l] : keys) {
    if (!s.empty()) s += ", ";
    s += "layer " + std::to_string(l) + (c < 0 ? "" : " @" + std::to_string(c));
  }
  return s;
}

// Rows of the univariate table aligned to `ids`; the "element" column keys rows.
Eigen::MatrixXd ReadUnivariate(const fs::path& path, const std::vector<std::string>& ids) {
  const auto rows = ReadCsv(path);
  if (rows.empty()) throw InvalidArgument(path.string() + ": empty univariate table");
  std::vector<std::string> features;
  for (const auto& [name, value] : rows.front())
    if (name != "element") features.push_back(name);
  if (features.empty()) throw InvalidArgument(path.string() + ": no feature columns");
  std::map<std::string, const std::map<std::string, std::string>*> by_id;
  for (const auto& r : rows) {
    auto it = r.find("element");
    if (it == r.end()) throw InvalidArgument(path.string() + ": missing 'element' column");
    by_id[it->second] = &r;
  }
  Eigen::MatrixXd x(ids.size(), features.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    auto it = by_id.find(ids[i]);
    if (it == by_id.end()) throw InvalidArgument(path.string() + ": no row for element " + ids[i]);
    for (size_t f = 0; f < features.size(); ++f) x(i, f) = std::stod(it->second->at(features[f]));
  }
  return x;
}

}  // namespace

int Analyze(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const nlohmann::json& section = config.Section("analyze");
  Provenance provenance(config);
  const fs::path sem_path = config.RequirePath("analyze.semantic");
  const fs::path syn_path = config.RequirePath("analyze.syntax");
  provenance.AddInput("semantic_manifest", sem_path);
  provenance.AddInput("syntax_manifest", syn_path);
  const auto semantic = ProbesByLayer(ReadManifest(sem_path));
  const auto syntax = ProbesByLayer(ReadManifest(syn_path));

  std::vector<LayerKey> only_sem, only_syn;
  for (const auto& [k, p] : semantic)
    if (!syntax.count(k)) only_sem.push_back(k);
  for (const auto& [k, p] : syntax)
    if (!semantic.count(k)) only_syn.push_back(k);
  if (!only_sem.empty() || !only_syn.empty()) {
    std::string msg = "semantic and syntax manifests cover different layers";
    if (!only_sem.empty()) msg += "; only semantic: " + DescribeKeys(only_sem);
    if (!only_syn.empty()) msg += "; only syntax: " + DescribeKeys(only_syn);
    throw InvalidArgument(msg);
  }
  if (semantic.empty()) throw InvalidArgument("the manifests hold no trained probes");

  const double factor = section.value("outlier_factor", 2.0);
  std::map<LayerKey, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> probes;
  CsvWriter alignment(provenance, {"checkpoint_words", "layer", "alignment"});
  CsvWriter norms(provenance, {"checkpoint_words", "layer", "unit", "semantic_norm", "syntax_norm",
                               "semantic_outlier", "syntax_outlier"});
  CsvWriter outliers(provenance, {"checkpoint_words", "layer", "semantic_outliers", "syntax_outliers",
                                  "joint_outliers", "joint_units"});
  for (const auto& [key, sem_file] : semantic) {
    Eigen::MatrixXd bs = ReadTensor(sem_file).ToDouble();
    Eigen::MatrixXd bx = ReadTensor(syntax.at(key)).ToDouble();
    if (bs.rows() != bx.rows())
      throw InvalidArgument("probes at " + DescribeKeys({key}) + " read different unit counts (" +
                            std::to_string(bs.rows()) + " vs " + std::to_string(bx.rows()) + ")");
    const std::string ckpt = CheckpointCell(key.first), layer = std::to_string(key.second);
    alignment.Row({ckpt, layer, FormatDouble(SubspaceAlignment(bs, bx))});
    const UnitNorms ns = ProbeUnitNorms(bs, factor), nx = ProbeUnitNorms(bx, factor);
    const std::set<int> os(ns.outliers.begin(), ns.outliers.end()), ox(nx.outliers.begin(), nx.outliers.end());
    for (Eigen::Index u = 0; u < bs.rows(); ++u)
      norms.Row({ckpt, layer, std::to_string(u), FormatDouble(ns.norms(u)), FormatDouble(nx.norms(u)),
                 os.count(u) ? "1" : "0", ox.count(u) ? "1" : "0"});
    const auto joint = JointOutliers(ns, nx);
    std::string units;
    for (int u : joint) units += (units.empty() ? "" : " ") + std::to_string(u);
    outliers.Row({ckpt, layer, std::to_string(ns.outliers.size()), std::to_string(nx.outliers.size()),
                  std::to_string(joint.size()), units});
    probes[key] = {std::move(bs), std::move(bx)};
  }
  WriteFileAtomic(config.out / "alignment.csv", alignment.str());
  WriteFileAtomic(config.out / "norms.csv", norms.str());
  WriteFileAtomic(config.out / "outliers.csv", outliers.str());
  out << "analyze: alignment and unit norms for " << probes.size() << " layers\n";

  if (!section.contains("encoding")) {
    out << "analyze: no encoding dataset configured; encoding section omitted\n";
    return kExitOk;
  }
  const auto pattern = config.Path("analyze.encoding.activations");
  if (!pattern) throw InvalidArgument("analyze.encoding needs \"activations\"");
  const auto files = ExpandPattern(*pattern);
  if (files.empty()) throw InvalidArgument("no encoding activations match " + pattern->string());

  RidgeOptions ridge;
  const nlohmann::json& enc = section["encoding"];
  if (enc.contains("penalties")) ridge.penalties = enc["penalties"].get<std::vector<double>>();
  std::optional<fs::path> univariate = config.Path("analyze.encoding.univariate");
  if (univariate && !fs::exists(*univariate)) {
    out << "analyze: univariate table " << univariate->string() << " not found; delta R2 section omitted\n";
    univariate.reset();
  } else if (!univariate) {
    out << "analyze: no univariate table; delta R2 section omitted\n";
  } else {
    provenance.AddInput("univariate", *univariate);
  }

  int warnings = 0;
  std::vector<std::vector<std::string>> encoding_rows, delta_rows;
  for (const auto& f : files) {
    provenance.AddInput("encoding:" + f.filename().string(), f);
    const ActivationMatrix acts = ReadTensor(f);
    const LayerKey key = KeyOf(acts.checkpoint_words, acts.layer_index);
    auto it = probes.find(key);
    if (it == probes.end()) {
      err << "warning: no probes for " << f.filename().string() << " (" << DescribeKeys({key}) << ")\n";
      ++warnings;
      continue;
    }
    const Eigen::MatrixXd h = acts.ToDouble();
    if (h.cols() != it->second.first.rows())
      throw InvalidArgument(f.string() + ": activation width does not match the probes");
    const Eigen::MatrixXd xs = h * it->second.first, xx = h * it->second.second;
    Eigen::MatrixXd subspace(h.rows(), xs.cols() + xx.cols());
    subspace << xs, xx;
    const Eigen::MatrixXd uni = univariate ? ReadUnivariate(*univariate, acts.element_ids) : Eigen::MatrixXd();

    std::vector<int> units;
    if (enc.contains("units")) {
      units = enc["units"].get<std::vector<int>>();
    } else {
      for (int u = 0; u < h.cols(); ++u) units.push_back(u);
    }
    const std::string ckpt = CheckpointCell(key.first), layer = std::to_string(key.second);
    double sum_uni = 0, sum_joint = 0, sum_delta = 0;
    int fitted = 0;
    for (int u : units) {
      if (u < 0 || u >= h.cols()) throw InvalidArgument("encoding unit " + std::to_string(u) + " out of range");
      const Eigen::VectorXd y = h.col(u);
      try {
        const VariancePartition p = PartitionVariance(xs, xx, y, ridge);
        encoding_rows.push_back({ckpt, layer, std::to_string(u), FormatDouble(p.r2_total),
                                 FormatDouble(p.r2_semantic), FormatDouble(p.r2_syntax), FormatDouble(p.cross_term)});
        if (univariate) {
          const IncrementalR2 d = IncrementalRSquared(uni, subspace, y, ridge);
          sum_uni += d.r2_univariate;
          sum_joint += d.r2_joint;
          sum_delta += d.delta;
          ++fitted;
        }
      } catch (const InvalidArgument& e) {
        err << "warning: layer " << layer << " unit " << u << ": " << e.what() << "\n";
        ++warnings;
      }
    }
    if (univariate && fitted)
      delta_rows.push_back({ckpt, layer, std::to_string(fitted), FormatDouble(sum_uni / fitted),
                            FormatDouble(sum_joint / fitted), FormatDouble(sum_delta / fitted)});
  }

  CsvWriter encoding(provenance, {"checkpoint_words", "layer", "unit", "r2_total", "r2_semantic", "r2_syntax",
                                  "cross_term"});
  for (const auto& r : encoding_rows) encoding.Row(r);
  WriteFileAtomic(config.out / "encoding.csv", encoding.str());
  if (univariate) {
    CsvWriter delta(provenance, {"checkpoint_words", "layer", "units", "mean_r2_univariate", "mean_r2_joint",
                                 "mean_delta_r2"});
    for (const auto& r : delta_rows) delta.Row(r);
    WriteFileAtomic(config.out / "delta_r2.csv", delta.str());
  }
  out << "analyze: encoding models for " << encoding_rows.size() << " units\n";
  return warnings ? kExitPartial : kExitOk;
}

}  // namespace geoprobe::cli
