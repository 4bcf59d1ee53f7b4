#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace catn {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitAbort = 3,
};

// Entry point of the `catn` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* version_string();

}  // namespace catn
