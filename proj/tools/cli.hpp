#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mig::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

/// Runs the `mig` command line (args excludes the program name). Never throws; errors are
/// reported on `err` and mapped to an exit code.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace mig::cli
