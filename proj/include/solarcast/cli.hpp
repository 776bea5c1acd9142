#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace solarcast {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitIo = 2,
  kExitInternal = 3,
};

/// Runs the solarcast command line. `args` excludes the program name.
/// Results go to `out`, usage and errors to `err`; logs go to stderr.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace solarcast
