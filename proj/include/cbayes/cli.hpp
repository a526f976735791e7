#pragma once

#include <exception>
#include <string>
#include <vector>

namespace cbayes::cli {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kInputError = 2,
  kDegenerateWeights = 3,
  kSamplerFailure = 4,
};

/// Exit status for an exception escaping a subcommand.
int exit_code(const std::exception& e);

int run(int argc, char** argv);
/// Same as above with the program name omitted from `args`.
int run(const std::vector<std::string>& args);

}  // namespace cbayes::cli
