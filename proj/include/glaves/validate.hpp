#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace glaves {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Fast invariant and oracle checks (round trips, gradient vs finite
// differences, KKT certification, weight invariances, determinism).
std::vector<CheckResult> run_validation_suite(std::uint64_t seed = 17);

}  // namespace glaves
