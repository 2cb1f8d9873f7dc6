#pragma once

// The uwamod command-line front end. Kept in the library so tests can drive it.

#include <iosfwd>
#include <string>
#include <vector>

namespace uwa {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;     // numerical failure during a run
inline constexpr int kExitValidation = 2;  // bad flags, config values or inputs
inline constexpr int kExitIo = 3;          // unreadable, unwritable or malformed files

// args[0] is the program name. Progress and reports go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uwa
