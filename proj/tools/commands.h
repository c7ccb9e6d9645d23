#ifndef GREENCOD_TOOLS_COMMANDS_H_
#define GREENCOD_TOOLS_COMMANDS_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace greencod::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,  // bad flags, config file or preset
  kDataError = 3,    // unreadable or malformed inputs, per-entry failures
  kInternalError = 4,
};

// Runs `greencod <args...>` (args exclude the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace greencod::cli

#endif  // GREENCOD_TOOLS_COMMANDS_H_
