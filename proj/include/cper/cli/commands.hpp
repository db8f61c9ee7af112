#pragma once

// Command-line front end: chat, replay, eval, score and serve.

#include <iosfwd>
#include <string>
#include <vector>

namespace cper::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,      // assertion or validation failure
  kExitEnvironment = 2,  // environment or backend failure
};

// `args` excludes the program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace cper::cli
