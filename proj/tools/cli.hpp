#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sepnet::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kVerifyFailed = 3;

/// Runs `sepnet <args...>` (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sepnet::cli
