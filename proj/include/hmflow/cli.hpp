#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hmf {

// Exit codes: 0 success, 1 domain error, 2 usage error.
enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitUsage = 2 };

// Runs one subcommand. `args` excludes the program name. Results go to
// `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hmf
