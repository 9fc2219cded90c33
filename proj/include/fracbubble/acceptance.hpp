#pragma once

// The acceptance suite: nine numbered criteria covering the operators, the
// Green machinery, the kernel profile, the reduced landscape, the ansatz
// energy expansion, the projected linear theory, nondegeneracy of the
// linearization, the min-max estimate, and stability under perturbation.
// Every tolerance is pinned here, not configurable: the suite answers
// "does this build still reproduce the theory" with a fixed yardstick.

#include <functional>
#include <string>
#include <vector>

namespace fracbubble {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    double measured = 0.0;   // the headline number the criterion gates on
    std::string detail;      // measured values with their thresholds
    double seconds = 0.0;
};

struct AcceptanceOptions {
    // Run only these ids; empty means all nine.
    std::vector<int> only;
    // Called as each criterion finishes, before the next starts, so partial
    // results can be flushed by the caller.
    std::function<void(const CriterionResult&)> on_result;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt = {});

bool all_passed(const std::vector<CriterionResult>& results);

// "[PASS] 3 kernel-derivatives ..." one-line rendering used by the
// acceptance binary and the verify command.
std::string format_criterion_line(const CriterionResult& r);

} // namespace fracbubble
