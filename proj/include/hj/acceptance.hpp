#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hj {

struct CriterionResult {
    std::string id;
    double measured = 0.0;   // headline quantity; pass requires measured <= threshold
    double threshold = 0.0;
    bool pass = false;       // covers every subcheck, not just the headline
    double seconds = 0.0;
    std::string note;
};

// Valid suite selectors: "all", "geometry" (A1-A5), or a single id "A1".."A11".
std::vector<std::string> acceptance_selectors();

// Runs the selected criteria, logging one pass/fail line each; heavy fixtures
// cache intermediate artifacts under outdir. Throws std::invalid_argument on
// an unknown selector, listing the valid ones.
std::vector<CriterionResult> run_acceptance(const std::string& selector,
                                            std::ostream& log,
                                            const std::string& outdir);

void write_acceptance_csv(const std::vector<CriterionResult>& rows,
                          const std::string& path);

}  // namespace hj
