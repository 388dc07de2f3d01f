#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace iceseg {

inline constexpr const char *version_string = "iceseg 1.0.0";

/// Exit codes shared by every command.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numerical = 3 };

/// Entry point behind the `iceseg` executable. `args` excludes the program name.
/// Commands: fit, simulate, evaluate, report, replay.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace iceseg
