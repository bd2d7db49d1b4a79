#pragma once

#include <iosfwd>

namespace glaves {

inline constexpr const char* kVersion = "0.1.0";

// Entry point shared by the binary and the tests. Returns the process exit
// status: 0 success, 1 validation failure, 2 input error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace glaves
