#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cnnbound {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerificationFailed = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Human-readable output
/// goes to `out`, diagnostics and usage text to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, const char* const* argv);

} // namespace cnnbound
