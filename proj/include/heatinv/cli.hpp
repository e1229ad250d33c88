#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace heatinv {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitCheckFailed = 1,  // run completed, a validation it performs did not pass
    kExitUsage = 2,
    kExitInvalidArgument = 3,
    kExitDomainViolation = 4,
    kExitNumericalFailure = 5,
    kExitIo = 6,
    kExitSchema = 7,
};

/// Runs the tool with `args` (without the program name). Every successful
/// run leaves manifest.json in its output directory; `replay` re-executes
/// a manifest.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace heatinv
