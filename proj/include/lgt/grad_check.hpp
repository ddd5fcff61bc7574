#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lgt/tape.hpp"

namespace lgt::ad {

/// Builds a scalar (1x1) output from the given parameter leaves.
using ScalarBuilder = std::function<Var(Tape<double>&, std::span<const Var>)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
    /// Parameter index and flat entry of the worst mismatch.
    std::size_t worst_param = 0;
    std::size_t worst_entry = 0;
};

/// Compares the tape's analytic gradient with central differences.
///
/// Per-entry error is |a - n| / max(1, |a|, |n|). `build` must be
/// deterministic: it is re-run twice per parameter entry.
inline GradCheckResult grad_check(const ScalarBuilder& build, std::vector<MatrixD> params, double eps = 1e-6) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw ShapeError("grad_check: eps must lie in [1e-7, 1e-3]");

    auto evaluate = [&](const std::vector<MatrixD>& ps) {
        Tape<double> tape;
        std::vector<Var> leaves;
        leaves.reserve(ps.size());
        for (const auto& p : ps) leaves.push_back(tape.variable(p));
        const double v = tape.value(build(tape, leaves))(0, 0);
        if (!std::isfinite(v)) throw NumericalError("grad_check: non-finite objective");
        return v;
    };

    Tape<double> tape;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.variable(p));
    const Var out = build(tape, leaves);
    if (!std::isfinite(tape.value(out)(0, 0))) throw NumericalError("grad_check: non-finite objective");
    tape.backward(out);

    GradCheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const MatrixD& analytic = tape.grad(leaves[p]);
        for (std::size_t e = 0; e < params[p].size(); ++e) {
            const double saved = params[p].data()[e];
            params[p].data()[e] = saved + eps;
            const double up = evaluate(params);
            params[p].data()[e] = saved - eps;
            const double down = evaluate(params);
            params[p].data()[e] = saved;

            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic.empty() ? 0.0 : analytic.data()[e];
            if (!std::isfinite(a)) throw NumericalError("grad_check: non-finite analytic gradient");
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_param = p;
                result.worst_entry = e;
            }
            ++result.entries_checked;
        }
    }
    return result;
}

}  // namespace lgt::ad
