#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace udic {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

/// Central finite-difference checks (step h) for every layer backward, the
/// VQ loss terms, the DAS layer, and the composed data-to-image loss with
/// frozen bottleneck assignments. Errors are scaled-relative:
/// |a - fd| / max(1, |a|, |fd|).
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, double tolerance = 1e-5,
                                                double step = 1e-6);

bool all_passed(const std::vector<GradCheckResult>& results);

}  // namespace udic
