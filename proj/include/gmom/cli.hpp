#pragma once

#include <string>
#include <vector>

namespace gmom {

// Exit codes of the command-line frontend.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNoSolution = 2;  // no statistically meaningful solution
inline constexpr int kExitInputError = 3;  // malformed CSV/JSON or bad flags
inline constexpr int kExitTimeout = 4;

// Runs the `gmom` command line (subcommands: moments, estimate, bench) and
// returns the exit code. args excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace gmom
