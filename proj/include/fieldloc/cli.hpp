#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fieldloc {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitSolver = 3;

/// Entry point for the `fieldloc` tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fieldloc
