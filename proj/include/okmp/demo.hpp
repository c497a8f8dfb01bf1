#pragma once

// Scripted run of the small integer example: three-member group over Z^3,
// one rekey and two departures. Fully deterministic.

#include <string>
#include <vector>

namespace okmp::demo {

struct Trace {
    std::vector<std::string> lines;
    /// Every broadcast and recovery matched its expected value.
    bool ok = true;
};

Trace run_worked_example();

} // namespace okmp::demo
