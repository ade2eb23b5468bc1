#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace geosub::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kNumericalFailure = 2,
};

/// Runs the `geosub` command line (generate, fit, evaluate, sweep).
/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geosub::cli
