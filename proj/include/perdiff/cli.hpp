#pragma once

// Command-line front end. Every subcommand reads flags and an optional JSON config file
// (flags win), writes an optional CSV table and a JSON document that echoes the resolved
// configuration. Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include <iosfwd>
#include <string>
#include <vector>

namespace perdiff::cli {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitNumerical = 3;

/// args excludes the program name. JSON goes to `out` unless --json names a file.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

/// Parses "0.1,0.5,1", a single value, or a geometric range "lo:hi:n".
std::vector<double> parse_gamma_list(const std::vector<std::string>& tokens);

}  // namespace perdiff::cli
