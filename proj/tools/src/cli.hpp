#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace smoe::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Parses `args` (args[0] is the program name) and runs the selected
// subcommand, writing progress to `out` and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smoe::cli
