#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "biogan/error.hpp"

namespace biogan::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Exit status for a library error kind.
int exit_code_for(ErrorKind kind);

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace biogan::cli
