#pragma once

#include <ostream>

namespace findtrack {

// Entry point of the findtrack command. Exit codes: 0 success, 1 replay mismatch,
// 2 I/O, configuration or usage error, 3 backend or protocol error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace findtrack
