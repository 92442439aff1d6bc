#pragma once

#include <iosfwd>

namespace lfcal {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

/// Entry point of the `lfcal` tool: calibrate, simulate, sweep, rectify,
/// refocus. Never throws; errors become a diagnostic on `err` and an exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lfcal
