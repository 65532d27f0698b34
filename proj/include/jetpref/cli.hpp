#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace jetpref {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Environment variable naming the default output root (default "runs").
inline constexpr const char* kOutputRootEnv = "JETPREF_OUTPUT_ROOT";

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

/// Top-level usage text including every config key.
std::string cli_help_text();

}  // namespace jetpref
