#pragma once

#include <iosfwd>

namespace apaudit {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // internal error or unrecoverable LLM failure
  kExitConfig = 2,   // bad flags, config or artifacts; nothing written
  kExitPartial = 3,  // scan finished but some seeds errored
};

/// Entry point of the apaudit command: index, synthesize, scan, evaluate, report.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace apaudit
