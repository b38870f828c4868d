#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fricsym {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitFit = 3, kExitMismatch = 4 };

/// Runs one `fricsym` invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fricsym
