#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clusterfit::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Parses argv and runs the chosen subcommand. Normal output goes to `out`,
/// progress and errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clusterfit::cli
