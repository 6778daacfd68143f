#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pnc::cli {

enum ExitCode { kSuccess = 0, kInvalidConfig = 2, kNumericalFailure = 3 };

/// Parses arguments (argv[0] is the program name), runs one subcommand and
/// writes its artifacts. Diagnostics go to `err`, the artifact directory to
/// `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace pnc::cli
