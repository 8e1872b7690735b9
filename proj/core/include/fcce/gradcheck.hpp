#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fcce::harness {

inline constexpr double kGradcheckThreshold = 1e-4;

struct GradcheckRow {
    std::string mode;
    double max_rel_err = 0.0;
    int instances = 0;
};

/// Names accepted by gradcheck(); loss modes first, then autodiff ops.
const std::vector<std::string>& gradcheck_modes();

/// Compares analytic gradients with central finite differences in double precision over
/// `instances` random problems per mode. Relative error per entry is
/// |a - n| / max(|a|, |n|, 1e-3).
std::vector<GradcheckRow> gradcheck(const std::vector<std::string>& modes, int instances, std::uint64_t seed);

}  // namespace fcce::harness
