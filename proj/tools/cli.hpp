#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace saekit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs the toolkit with argv-style arguments (args[0] is the program name).
/// Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace saekit::cli
