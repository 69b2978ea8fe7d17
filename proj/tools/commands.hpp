#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace nbeats::cli {

// Exit codes: 0 success, 1 input/config error, 2 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumeric = 2;

inline constexpr int kManifestVersion = 1;

// Entry point shared by the executable and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nbeats::cli
