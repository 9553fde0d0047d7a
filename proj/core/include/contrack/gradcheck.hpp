#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "contrack/tensor.hpp"

namespace contrack {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

/// Central finite differences (eps) against the tape gradient, per input
/// element. Returns the worst relative error over all inputs.
double finite_diff_error(const ScalarFn& fn, std::vector<Tensor> inputs, double eps = 1e-5);

/// One forward/backward, then finite differences along random directions
/// instead of per element; usable for large parameter sets.
double directional_diff_error(const ScalarFn& fn, std::vector<Tensor> inputs,
                              std::uint64_t seed, int directions = 5, double eps = 1e-5);

struct GradCheck {
    std::string name;
    double max_err = 0.0;
};

/// Every differentiable op plus the full model+loss graph at a small config.
std::vector<GradCheck> run_gradchecks(std::uint64_t seed);

bool all_pass(const std::vector<GradCheck>& checks, double tol = 1e-4);

}  // namespace contrack
