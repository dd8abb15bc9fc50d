#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qfl::tools {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fast invariant suite behind `qfl check`.
std::vector<CheckResult> run_checks(std::uint64_t seed, int trials);

}  // namespace qfl::tools
