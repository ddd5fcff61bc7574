#pragma once

#include <ostream>

namespace lgt::cli {

enum ExitCode { ok = 0, usage = 1, data_error = 2, numerical_abort = 3 };

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lgt::cli
