#ifndef GEOPROBE_SRC_CLI_COMMANDS_H_
#define GEOPROBE_SRC_CLI_COMMANDS_H_

#include <ostream>

#include "cli/common.h"

namespace geoprobe::cli {

// Each returns an ExitCode; validation problems are thrown as geoprobe::Error.
int BuildDataset(const RunConfig& config, std::ostream& out, std::ostream& err);
int Train(const RunConfig& config, std::ostream& out, std::ostream& err);
int Eval(const RunConfig& config, std::ostream& out, std::ostream& err);
int Emergence(const RunConfig& config, std::ostream& out, std::ostream& err);
int Visualize(const RunConfig& config, std::ostream& out, std::ostream& err);
int Analyze(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace geoprobe::cli

#endif  // GEOPROBE_SRC_CLI_COMMANDS_H_
