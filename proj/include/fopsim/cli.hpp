#pragma once

#include <iosfwd>

namespace fopsim {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitInfeasible = 3,
  kExitInternal = 4,
};

// Entry point of the fopsim command-line tool. Kept in the library so tests
// can drive commands without spawning processes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fopsim
