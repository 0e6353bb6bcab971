#pragma once

#include <iosfwd>

namespace qpdecon {

//! Exit status contract of the command-line tool.
enum ExitCode : int
{
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitSolver = 3,
  kExitSelectionRequired = 4
};

//! Entry point of the `qpdecon` tool (subcommands fit, scree, simulate).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qpdecon
