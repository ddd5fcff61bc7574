#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lgt/dense.hpp"
#include "lgt/error.hpp"

namespace lgt {

/// One parameter's slice of an optimizer step. An empty grad counts as zero.
template <typename T>
struct AdamParam {
    DenseMatrix<T>* value;
    const DenseMatrix<T>* grad;
    double lr;
    double weight_decay;
};

template <typename T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<DenseMatrix<T>> first_moment;
    std::vector<DenseMatrix<T>> second_moment;
};

/// Adam with bias correction and decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps)) - lr * wd * p
/// Parameters are matched to moment slots by position.
template <typename T>
void adam_step(std::span<const AdamParam<T>> params, AdamState<T>& state) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (!p.grad->empty() && !p.grad->same_shape(*p.value))
            throw ShapeError("adam_step: gradient " + shape_str(*p.grad) + " does not match parameter " + shape_str(*p.value));
        if (!p.grad->empty() && !p.grad->all_finite()) {
            std::size_t bad = 0;
            while (std::isfinite(p.grad->data()[bad])) ++bad;
            throw NumericalError("adam_step: non-finite gradient in parameter " + std::to_string(i) + " (" +
                                 shape_str(*p.value) + "), entry " + std::to_string(bad) + ", step " +
                                 std::to_string(state.step + 1));
        }
    }
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.value->rows(), p.value->cols());
            state.second_moment.emplace_back(p.value->rows(), p.value->cols());
        }
    }
    if (state.first_moment.size() != params.size())
        throw ShapeError("adam_step: parameter list changed between steps");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        if (!m.same_shape(*p.value)) throw ShapeError("adam_step: moment shape mismatch");
        T* w = p.value->data();
        const T* g = p.grad->empty() ? nullptr : p.grad->data();
        for (std::size_t e = 0, n = p.value->size(); e < n; ++e) {
            const double ge = g ? static_cast<double>(g[e]) : 0.0;
            const double me = state.beta1 * m.data()[e] + (1.0 - state.beta1) * ge;
            const double ve = state.beta2 * v.data()[e] + (1.0 - state.beta2) * ge * ge;
            m.data()[e] = static_cast<T>(me);
            v.data()[e] = static_cast<T>(ve);
            const double update = (me / c1) / (std::sqrt(ve / c2) + state.eps);
            const double we = static_cast<double>(w[e]);
            w[e] = static_cast<T>(we - p.lr * update - p.lr * p.weight_decay * we);
        }
    }
}

}  // namespace lgt
