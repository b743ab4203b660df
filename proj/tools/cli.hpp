#ifndef SYNFLOW_TOOLS_CLI_HPP_
#define SYNFLOW_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace synflow::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

// Runs one command line (without the program name) and returns its exit code.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace synflow::cli

#endif  // SYNFLOW_TOOLS_CLI_HPP_
