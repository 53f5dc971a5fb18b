#pragma once

#include <string>
#include <vector>

namespace cableperc {

struct CriterionResult {
    int index = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    std::string payload;  // exact numeric record, used by the determinism check
    double seconds = 0.0;
};

// Runs the acceptance criteria (all, or a single one). quick mode shrinks
// the Monte Carlo grids; it is also the payload of the determinism check.
std::vector<CriterionResult> run_acceptance(bool quick, int only = -1);

// Prints one pass/fail line per criterion; returns the number of failures.
int report_acceptance(const std::vector<CriterionResult>& results);

}  // namespace cableperc
