#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace csrnet::cli {

/// Exit codes of the `csrnet` command.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kVerificationFailed = 3,
};

/// Runs the command line `args` (without the program name). Regular output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csrnet::cli
