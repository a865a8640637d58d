#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace taskemb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// Parses `args` (without the program name), runs the command and maps
/// failures to exit codes. Results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace taskemb::cli
