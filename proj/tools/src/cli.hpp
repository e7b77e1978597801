#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rblt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAborted = 3;

/// Entry point shared by the executable and the tests. argv[0] is the program name.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace rblt::cli
