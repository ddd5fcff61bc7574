#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lgt/grad_check.hpp"
#include "lgt/layers.hpp"
#include "lgt/model.hpp"

namespace lgt {

struct GradCheckOptions {
    std::size_t seeds = 100;
    std::uint64_t first_seed = 0;
    double eps = 1e-6;
    double tolerance = 1e-6;
    /// Doubles every backward pass through the loss node; the suite must fail.
    bool corrupt_backward = false;
};

struct GradCheckCaseResult {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
    std::uint64_t worst_seed = 0;
    bool passed = true;
};

struct GradCheckSuiteResult {
    std::vector<GradCheckCaseResult> cases;
    bool passed = true;
};

/// Central-difference check of the gradients forward() produces for every
/// trainable array of `stack` (weights, adapters, head) under masked
/// cross-entropy. Parameters are perturbed in place and restored.
ad::GradCheckResult stack_grad_check(const BasicGraphContext<double>& ctx, BasicLayerStack<double>& stack,
                                     std::span<const int> labels, std::span<const std::uint32_t> mask,
                                     ad::LossReduction reduction, double eps, bool corrupt_backward = false);

/// Every op and layer type on random graphs with n <= 10 and widths <= 8.
GradCheckSuiteResult run_gradcheck_suite(const GradCheckOptions& opt);

}  // namespace lgt
