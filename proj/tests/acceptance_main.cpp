// Acceptance runner: one [PASS]/[FAIL] line per criterion, exit 0 iff all
// pass. Optional arguments select a subset of criterion ids (1..9).

#include <cstdio>
#include <cstdlib>

#include "fracbubble/acceptance.hpp"

int main(int argc, char** argv) {
    fracbubble::AcceptanceOptions opt;
    for (int i = 1; i < argc; ++i) opt.only.push_back(std::atoi(argv[i]));
    opt.on_result = [](const fracbubble::CriterionResult& r) {
        std::printf("%s\n", fracbubble::format_criterion_line(r).c_str());
        std::fflush(stdout);
    };
    const auto results = fracbubble::run_acceptance(opt);
    const bool ok = fracbubble::all_passed(results);
    std::printf("%zu criteria run: %s\n", results.size(),
                ok ? "all passed" : "FAILURES present");
    return ok ? 0 : 1;
}
