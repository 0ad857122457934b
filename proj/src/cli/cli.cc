#include "geoprobe/cli.h"

#include <CLI11.hpp>

#include <functional>
#include <map>
#include <ostream>

#include "cli/commands.h"

namespace geoprobe {

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using Command = std::function<int(const cli::RunConfig&, std::ostream&, std::ostream&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"build-dataset", {"Build the semantic word list and category-balanced split", cli::BuildDataset}},
      {"train", {"Train probes for every activation file", cli::Train}},
      {"eval", {"Score trained probes layer by layer", cli::Eval}},
      {"emergence", {"Fit emergence curves across checkpoints", cli::Emergence}},
      {"visualize", {"Export a 2-D probe projection as SVG and CSV", cli::Visualize}},
      {"analyze", {"Compare semantic and syntactic probes", cli::Analyze}},
  };

  CLI::App app("Structural probes over model activations", "geoprobe");
  app.set_version_flag("--version", std::string(kToolkitVersion));
  app.require_subcommand(1);
  std::string config_path;
  cli::Flags flags;
  uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--jobs", jobs, "Parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_flag("--grid", flags.grid, "Search the learning-rate grid");
    sub->add_flag("--baseline", flags.baseline, "Also score random projections");
    sub->add_flag("--resume", flags.resume, "Skip layers already trained with this config");
    sub->add_flag("--tree", flags.tree, "Draw the minimum spanning tree of a sentence");
  }

  std::vector<std::string> argv_storage = {"geoprobe"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) flags.seed = seed;
  if (chosen->count("--jobs")) flags.jobs = jobs;
  if (chosen->count("--out")) flags.out = out_dir;
  try {
    const cli::RunConfig config = cli::LoadRunConfig(config_path, flags);
    return commands.at(chosen->get_name()).second(config, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace geoprobe
