#include "cli/common.h"

#include <fnmatch.h>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "geoprobe/cli.h"
#include "geoprobe/random.h"

namespace geoprobe::cli {

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string Digest(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

std::string FileDigest(const fs::path& path) { return Digest(ReadFile(path)); }

namespace {

const nlohmann::json* Lookup(const nlohmann::json& root, const std::string& dotted) {
  const nlohmann::json* node = &root;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (!node->is_object() || !node->contains(part)) return nullptr;
    node = &(*node)[part];
  }
  return node;
}

}  // namespace

std::optional<fs::path> RunConfig::Path(const std::string& key) const {
  const nlohmann::json* node = Lookup(raw, key);
  if (!node || node->is_null()) return std::nullopt;
  if (!node->is_string()) throw InvalidArgument("config key '" + key + "' must be a path string");
  const fs::path p = node->get<std::string>();
  return p.is_absolute() ? p : base_dir / p;
}

fs::path RunConfig::RequirePath(const std::string& key) const {
  const auto p = Path(key);
  if (!p) throw InvalidArgument("config is missing '" + key + "'");
  if (!fs::exists(*p)) throw InvalidArgument("'" + key + "' points to a missing file: " + p->string());
  return *p;
}

const nlohmann::json& RunConfig::Section(const std::string& name) const {
  static const nlohmann::json kEmpty = nlohmann::json::object();
  const nlohmann::json* node = Lookup(raw, name);
  if (!node || node->is_null()) return kEmpty;
  if (!node->is_object()) throw InvalidArgument("config section '" + name + "' must be an object");
  return *node;
}

RunConfig LoadRunConfig(const fs::path& file, const Flags& flags) {
  RunConfig c;
  c.flags = flags;
  c.base_dir = file.parent_path();
  try {
    c.raw = nlohmann::json::parse(ReadFile(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
  if (!c.raw.is_object()) throw InvalidArgument("config must be a JSON object");
  if (flags.seed) c.raw["seed"] = *flags.seed;
  if (flags.jobs) c.raw["jobs"] = *flags.jobs;

  try {
    if (c.raw.contains("task")) c.task = ParseStructureKind(c.raw["task"].get<std::string>());
    if (c.raw.contains("objective")) c.objective = ParseObjective(c.raw["objective"].get<std::string>());
    c.seed = c.raw.value("seed", uint64_t{0});
    c.jobs = c.raw.value("jobs", 1);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (c.jobs < 1) throw InvalidArgument("jobs must be at least 1");

  if (flags.out) {
    c.out = *flags.out;
  } else if (auto p = c.Path("out")) {
    c.out = *p;
  } else {
    throw InvalidArgument("no output directory: set \"out\" in the config or pass --out");
  }
  // Output location and parallelism do not change results.
  nlohmann::json hashed = c.raw;
  hashed.erase("out");
  hashed.erase("jobs");
  hashed["flags"] = {{"grid", flags.grid}, {"baseline", flags.baseline}, {"tree", flags.tree}};
  c.hash = Digest(hashed.dump());
  return c;
}

void Provenance::AddInput(const std::string& name, const fs::path& path) {
  inputs_[name] = FileDigest(path);
}

nlohmann::json Provenance::ToJson() const {
  return {{"toolkit", std::string("geoprobe ") + kToolkitVersion},
          {"config_hash", config_hash_},
          {"inputs", inputs_}};
}

std::vector<std::string> Provenance::HeaderLines() const {
  std::vector<std::string> lines = {std::string("toolkit: geoprobe ") + kToolkitVersion,
                                    "config_hash: " + config_hash_};
  for (const auto& [name, digest] : inputs_) lines.push_back("input " + name + ": " + digest);
  return lines;
}

void WriteFileAtomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out << contents;
    if (!out) throw InvalidArgument("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void WriteJson(const fs::path& path, nlohmann::json j, const Provenance& provenance) {
  j["provenance"] = provenance.ToJson();
  WriteFileAtomic(path, j.dump(2) + "\n");
}

void WriteTensorAtomic(const ActivationMatrix& m, const fs::path& path) {
  WriteFileAtomic(path, EncodeTensor(m));
}

CsvWriter::CsvWriter(const Provenance& provenance, const std::vector<std::string>& columns)
    : columns_(columns.size()) {
  for (const auto& line : provenance.HeaderLines()) text_ += "# " + line + "\n";
  Row(columns);
}

void CsvWriter::Row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::logic_error("CSV row width mismatch");
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string FormatOptional(const std::optional<double>& v) { return v ? FormatDouble(*v) : ""; }

std::vector<std::map<std::string, std::string>> ReadCsv(const fs::path& path) {
  std::istringstream in(ReadFile(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ParseError(path.string() + ": expected " + std::to_string(header.size()) + " columns", line_no);
    std::map<std::string, std::string> row;
    for (size_t i = 0; i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<fs::path> ExpandPattern(const fs::path& pattern) {
  const fs::path dir = pattern.has_parent_path() ? pattern.parent_path() : fs::path(".");
  const std::string glob = pattern.filename().string();
  std::vector<fs::path> out;
  if (glob.find_first_of("*?[") == std::string::npos) {
    if (fs::exists(pattern)) out.push_back(pattern);
    return out;
  }
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && fnmatch(glob.c_str(), entry.path().filename().c_str(), 0) == 0)
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

LoadedGold LoadGold(const RunConfig& config, const std::vector<std::string>& element_ids,
                    Provenance& provenance) {
  LoadedGold out;
  switch (config.task) {
    case StructureKind::kSyntax: {
      const fs::path conllu = config.RequirePath("gold.conllu");
      provenance.AddInput("conllu", conllu);
      out.sentences = ReadConllu(conllu);
      out.gold = MakeSyntaxGold(out.sentences);
      break;
    }
    case StructureKind::kSemantic: {
      const fs::path graph = config.RequirePath("gold.graph");
      provenance.AddInput("graph", graph);
      out.graph = std::make_shared<SemanticGraph>(SemanticGraph::ReadTsv(graph));
      out.gold = MakeSemanticGold(out.graph, element_ids);
      break;
    }
    case StructureKind::kPhoneme: {
      const fs::path features = config.RequirePath("gold.features");
      const fs::path spans = config.RequirePath("gold.spans");
      provenance.AddInput("features", features);
      provenance.AddInput("spans", spans);
      auto table = std::make_shared<PhonemeFeatureTable>(ReadPhonemeTable(features));
      const SpanTable span_table = ReadSpanTable(spans);
      std::vector<std::pair<std::string, std::string>> tokens;
      for (const auto& row : span_table.rows) tokens.emplace_back(row.element_id, row.label);
      out.gold = MakePhonemeGold(table, tokens);
      break;
    }
  }
  return out;
}

LoadedGold LoadGoldForActivations(const RunConfig& config, const std::vector<fs::path>& files,
                                  Provenance& provenance) {
  if (config.task != StructureKind::kSemantic) return LoadGold(config, {}, provenance);
  std::string last_error = "no activation files";
  for (const auto& f : files) {
    try {
      return LoadGold(config, LoadActivations(config, f).element_ids, provenance);
    } catch (const TensorFormatError& e) {
      last_error = f.string() + ": " + e.what();
    }
  }
  throw InvalidArgument("cannot read any activation file to list elements; " + last_error);
}

ElementSplit LoadSplit(const fs::path& path, const GoldStructure& gold, uint64_t seed) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ReadFile(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ElementSplit split;
  split.roles.assign(gold.size(), Role::kUnused);
  auto assign = [&](const std::string& id, Role role) {
    if (auto e = gold.Find(id)) split.roles[*e] = role;
  };
  try {
    if (j.contains("roles")) {
      for (const auto& [id, role] : j["roles"].items()) assign(id, ParseRole(role.get<std::string>()));
    } else {
      for (const char* name : {"train", "validation", "test"})
        if (j.contains(name))
          for (const auto& id : j[name]) assign(id.get<std::string>(), ParseRole(name));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }

  if (split.Members(Role::kValidation).empty()) {
    // Carve validation units (sentences or elements) out of train.
    std::vector<std::vector<int>> units;
    if (!gold.groups().empty()) {
      for (const auto& g : gold.groups())
        if (split.roles[g.front()] == Role::kTrain) units.push_back(g);
    } else {
      for (int e : split.Members(Role::kTrain)) units.push_back({e});
    }
    Rng rng(MixSeed(seed, 11));
    rng.Shuffle(units);
    const size_t take = (units.size() + 9) / 10;
    for (size_t u = 0; u < take && u + 1 < units.size(); ++u)
      for (int e : units[u]) split.roles[e] = Role::kValidation;
  }
  if (split.Members(Role::kTrain).empty()) throw InvalidArgument(path.string() + ": no training elements");
  if (split.Members(Role::kTest).empty()) throw InvalidArgument(path.string() + ": no test elements");
  return split;
}

nlohmann::json SplitToJson(const ElementSplit& split, const GoldStructure& gold) {
  nlohmann::json roles = nlohmann::json::object();
  for (int e = 0; e < gold.size(); ++e)
    if (split.roles[e] != Role::kUnused) roles[gold.element_id(e)] = ToString(split.roles[e]);
  return {{"roles", roles}};
}

std::string ArtifactStem(int layer, const std::optional<int64_t>& checkpoint_words) {
  char buf[64];
  if (checkpoint_words)
    std::snprintf(buf, sizeof(buf), "L%03d_C%" PRId64, layer, *checkpoint_words);
  else
    std::snprintf(buf, sizeof(buf), "L%03d_Cnone", layer);
  return buf;
}

std::vector<fs::path> ActivationFiles(const RunConfig& config) {
  const auto pattern = config.Path("activations");
  if (!pattern) throw InvalidArgument("config is missing 'activations'");
  auto files = ExpandPattern(*pattern);
  if (files.empty()) throw InvalidArgument("no activation files match " + pattern->string());
  return files;
}

ActivationMatrix LoadActivations(const RunConfig& config, const fs::path& path) {
  ActivationMatrix acts = ReadTensor(path);
  const nlohmann::json& gold = config.Section("gold");
  if (config.task == StructureKind::kPhoneme && gold.value("pool", false))
    acts = PoolSpans(acts, ReadSpanTable(config.RequirePath("gold.spans")));
  return acts;
}

nlohmann::json Manifest::ToJson() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json j = {{"layer", e.layer},
                        {"checkpoint_words", e.checkpoint_words ? nlohmann::json(*e.checkpoint_words)
                                                                : nlohmann::json()},
                        {"activation", e.activation},
                        {"activation_digest", e.activation_digest},
                        {"status", e.status}};
    if (e.status == "ok") {
      j["probe"] = e.probe;
      j["sidecar"] = e.sidecar;
    } else {
      j["error"] = e.error;
    }
    list.push_back(std::move(j));
  }
  return {{"task", ToString(task)}, {"objective", ToString(objective)}, {"entries", list}};
}

int Manifest::LayerCount() const {
  int n = 0;
  for (const auto& e : entries) n = std::max(n, e.layer + 1);
  return n;
}

Manifest ReadManifest(const fs::path& path) {
  if (!fs::exists(path)) throw InvalidArgument("manifest not found: " + path.string() + " (run train first)");
  Manifest m;
  m.dir = path.parent_path();
  try {
    const auto j = nlohmann::json::parse(ReadFile(path));
    m.task = ParseStructureKind(j.at("task").get<std::string>());
    m.objective = ParseObjective(j.at("objective").get<std::string>());
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.layer = je.at("layer").get<int>();
      if (!je.at("checkpoint_words").is_null()) e.checkpoint_words = je["checkpoint_words"].get<int64_t>();
      e.activation = je.at("activation").get<std::string>();
      e.activation_digest = je.value("activation_digest", "");
      e.status = je.at("status").get<std::string>();
      e.probe = je.value("probe", "");
      e.sidecar = je.value("sidecar", "");
      e.error = je.value("error", "");
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace geoprobe::cli
