#pragma once

#include <string>
#include <vector>

namespace dfdm {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double threshold = 1e-5;  // 1e-4 for the end-to-end models
    std::size_t trials = 0;

    bool passed() const { return max_rel_err < threshold; }
};

struct GradCheckOptions {
    std::uint64_t seed = 1;
    std::size_t trials = 20;
    // Corrupts the analytic gradients before comparison; the suite must then
    // fail, which guards against the checker itself going soft.
    bool inject_error = false;
};

const std::vector<std::string>& gradcheck_names();

/// Central-finite-difference verification of every backward pass in f64.
/// `which` is one of gradcheck_names() or "all". Instances whose forward pass
/// lands within 1e-3 of a relu/maxpool/hinge kink are resampled.
std::vector<GradCheckResult> run_gradcheck(const std::string& which,
                                           const GradCheckOptions& options);

}  // namespace dfdm
