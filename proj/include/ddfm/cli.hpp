#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ddfm/selftest.hpp"

namespace ddfm::cli {

// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kIoError = 2,
  kTransportError = 3,
  kSelftestFailure = 4,
  kInternalError = 5,
};

// Entry point shared by the executable and the tests. `args` excludes the
// program name. `ops` overrides the operations checked by `selftest`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const SelftestOps* ops = nullptr);

// Maps an exception raised by the engine onto an exit code.
int exit_code_for(const std::exception& e);

}  // namespace ddfm::cli
