#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace forchestra::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeError = 2 };

/// Runs one command line (without the program name). Results go to files
/// under --out; `out` receives echoes, `err` progress and diagnostics.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace forchestra::cli
