#ifndef GEOPROBE_CLI_H_
#define GEOPROBE_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace geoprobe {

inline constexpr char kToolkitVersion[] = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitPartial = 2 };

// Parses `args` (without the program name) and runs one subcommand.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geoprobe

#endif  // GEOPROBE_CLI_H_
