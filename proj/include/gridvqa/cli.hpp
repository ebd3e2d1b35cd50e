#pragma once

#include <ostream>

namespace gridvqa {

/// Runs one subcommand: generate, balance, bias, summarize, oracle,
/// evaluate, parse-question. Returns the process exit status; errors are
/// reported on `err` and yield a nonzero status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace gridvqa
