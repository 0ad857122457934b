// Plumbing shared by the subcommands: run configuration, provenance and
// deterministic output files.
#ifndef GEOPROBE_SRC_CLI_COMMON_H_
#define GEOPROBE_SRC_CLI_COMMON_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoprobe/gold.h"
#include "geoprobe/probe.h"
#include "geoprobe/tensor_io.h"

namespace geoprobe::cli {

namespace fs = std::filesystem;

// Command-line overrides applied on top of the config file.
struct Flags {
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out;
  bool grid = false;
  bool baseline = false;
  bool resume = false;
  bool tree = false;
};

struct RunConfig {
  fs::path base_dir;    // relative paths resolve against the config file
  nlohmann::json raw;   // config after overrides
  std::string hash;     // digest of `raw` minus the output directory
  StructureKind task = StructureKind::kSyntax;
  Objective objective = Objective::kDistance;
  fs::path out;
  uint64_t seed = 0;
  int jobs = 1;
  Flags flags;

  // Resolved path at a dotted key ("gold.conllu"); nullopt when absent.
  std::optional<fs::path> Path(const std::string& key) const;
  // Same, but the key must be present and the file must exist.
  fs::path RequirePath(const std::string& key) const;
  const nlohmann::json& Section(const std::string& name) const;
};

RunConfig LoadRunConfig(const fs::path& file, const Flags& flags);

// 64-bit FNV-1a, hex encoded.
std::string Digest(const std::string& bytes);
std::string FileDigest(const fs::path& path);
std::string ReadFile(const fs::path& path);

// Input files recorded in provenance headers, keyed by display name.
class Provenance {
 public:
  explicit Provenance(const RunConfig& config) : config_hash_(config.hash) {}
  void AddInput(const std::string& name, const fs::path& path);
  void AddDigest(const std::string& name, const std::string& digest) { inputs_[name] = digest; }
  nlohmann::json ToJson() const;
  // "# key: value" lines for CSV and SVG headers.
  std::vector<std::string> HeaderLines() const;

 private:
  std::string config_hash_;
  std::map<std::string, std::string> inputs_;
};

// Writes to a sibling temporary file and renames over `path`.
void WriteFileAtomic(const fs::path& path, const std::string& contents);
void WriteJson(const fs::path& path, nlohmann::json j, const Provenance& provenance);
void WriteTensorAtomic(const ActivationMatrix& m, const fs::path& path);

// CSV with "#" provenance lines, a header row and rows written as given.
class CsvWriter {
 public:
  CsvWriter(const Provenance& provenance, const std::vector<std::string>& columns);
  void Row(const std::vector<std::string>& cells);
  std::string str() const { return text_; }

 private:
  std::string text_;
  size_t columns_;
};

std::string FormatDouble(double v);  // %.9g
std::string FormatOptional(const std::optional<double>& v);

// Rows of a CSV file keyed by header name; "#" lines skipped.
std::vector<std::map<std::string, std::string>> ReadCsv(const fs::path& path);

// Files matching a pattern whose last component may contain * and ?.
std::vector<fs::path> ExpandPattern(const fs::path& pattern);

// Gold structure plus the raw inputs some metrics need.
struct LoadedGold {
  std::unique_ptr<GoldStructure> gold;
  std::vector<DependencySentence> sentences;      // syntax
  std::shared_ptr<const SemanticGraph> graph;     // semantic
};

// Builds the task's gold structure; pooled tasks take their element list
// from `element_ids` (the activation rows).
LoadedGold LoadGold(const RunConfig& config, const std::vector<std::string>& element_ids,
                    Provenance& provenance);

// As LoadGold; pooled tasks take their elements from the first readable
// activation file.
LoadedGold LoadGoldForActivations(const RunConfig& config, const std::vector<fs::path>& files,
                                  Provenance& provenance);

// Split file: {"roles": {"id": "train", ...}} or {"train": [...], "test": [...]}.
// Without a validation set, 10% of train is held out for validation.
ElementSplit LoadSplit(const fs::path& path, const GoldStructure& gold, uint64_t seed);
nlohmann::json SplitToJson(const ElementSplit& split, const GoldStructure& gold);

// "L003_C1000000" or "L003_Cnone".
std::string ArtifactStem(int layer, const std::optional<int64_t>& checkpoint_words);

// Files matched by the config's "activations" pattern; throws when none match.
std::vector<fs::path> ActivationFiles(const RunConfig& config);

// Reads one activation file, mean-pooling phoneme frames over the gold spans
// when "gold.pool" is set.
ActivationMatrix LoadActivations(const RunConfig& config, const fs::path& path);

// One trained probe in a run manifest. Paths are relative to the manifest
// directory except `activation`, which is absolute.
struct ManifestEntry {
  int layer = -1;
  std::optional<int64_t> checkpoint_words;
  std::string activation;
  std::string activation_digest;
  std::string probe;
  std::string sidecar;
  std::string status;  // "ok" or "failed"
  std::string error;
};

struct Manifest {
  StructureKind task = StructureKind::kSyntax;
  Objective objective = Objective::kDistance;
  std::vector<ManifestEntry> entries;
  fs::path dir;

  nlohmann::json ToJson() const;
  // Layers count for relative depth: max layer + 1.
  int LayerCount() const;
};

Manifest ReadManifest(const fs::path& path);

}  // namespace geoprobe::cli

#endif  // GEOPROBE_SRC_CLI_COMMON_H_
