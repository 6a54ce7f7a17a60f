#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qfs::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,    // bad flags or config values
    kData = 2,     // unreadable, malformed or inconsistent inputs and outputs
    kNumeric = 3,  // non-finite loss or gradient during training
};

/// Runs the `qfs` command line. `args[0]` is the program name. Errors are
/// reported on `err` and mapped to an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qfs::cli
