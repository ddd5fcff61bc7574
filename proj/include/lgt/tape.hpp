#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lgt/dense.hpp"
#include "lgt/kernels.hpp"
#include "lgt/sparse.hpp"

namespace lgt::ad {

/// Handle to a node on a Tape.
struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
};

enum class LossReduction { mean, sum };

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, which is a topological order, so
/// backward() walks the node list once in reverse. Gradients accumulate
/// additively when a value fans out to several consumers. Sparse operators
/// referenced by spmm nodes must outlive the tape.
template <typename T>
class Tape {
public:
    using Backward = std::function<void(Tape&, const DenseMatrix<T>& out_grad)>;

    Var constant(DenseMatrix<T> value) { return push(std::move(value), false, {}); }
    Var variable(DenseMatrix<T> value) { return push(std::move(value), true, {}); }

    const DenseMatrix<T>& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of the last backward() target with respect to v. Empty when v
    /// received no gradient.
    const DenseMatrix<T>& grad(Var v) const { return nodes_.at(v.id).grad; }

    std::size_t size() const noexcept { return nodes_.size(); }

    /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
    void backward(Var out) {
        const auto& root = nodes_.at(out.id);
        if (root.value.rows() != 1 || root.value.cols() != 1)
            throw ShapeError("backward: target must be 1x1, got " + shape_str(root.value));
        for (auto& node : nodes_) node.grad = DenseMatrix<T>{};
        nodes_[out.id].grad = DenseMatrix<T>(1, 1, T{1});
        for (std::size_t i = out.id + 1; i-- > 0;) {
            Node& node = nodes_[i];
            if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
            // Moved out so the closure may append to other nodes' grads safely.
            DenseMatrix<T> g = std::move(node.grad);
            node.backward(*this, g);
            node.grad = std::move(g);
        }
    }

    /// Appends an op result. `backward` runs only if some input requires grad.
    Var push(DenseMatrix<T> value, bool requires_grad, Backward backward) {
        nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(backward)});
        return Var{nodes_.size() - 1};
    }

    void accumulate(Var v, const DenseMatrix<T>& g) {
        Node& node = nodes_.at(v.id);
        if (!node.requires_grad) return;
        if (node.grad.empty()) {
            node.grad = g;
        } else {
            kernels::axpy(node.grad, g);
        }
    }

    void accumulate(Var v, DenseMatrix<T>&& g) {
        Node& node = nodes_.at(v.id);
        if (!node.requires_grad) return;
        if (node.grad.empty()) {
            node.grad = std::move(g);
        } else {
            kernels::axpy(node.grad, g);
        }
    }

private:
    struct Node {
        DenseMatrix<T> value;
        DenseMatrix<T> grad;
        bool requires_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitives. Each forward mirrors a kernel; each backward is the adjoint.
// ---------------------------------------------------------------------------

/// S * x, with S a constant. Backward: dx = S^T g.
template <typename T>
Var spmm(Tape<T>& tape, const SparseOperator& s, Var x) {
    auto out = kernels::spmm(s.matrix(), tape.value(x));
    const bool rg = tape.requires_grad(x);
    return tape.push(std::move(out), rg, [&s, x](Tape<T>& t, const DenseMatrix<T>& g) {
        t.accumulate(x, kernels::spmm(s.transposed(), g));
    });
}

/// a * b. Backward: da = g b^T, db = a^T g.
template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
    auto out = kernels::matmul(tape.value(a), tape.value(b));
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.push(std::move(out), rg, [a, b](Tape<T>& t, const DenseMatrix<T>& g) {
        if (t.requires_grad(a)) t.accumulate(a, kernels::matmul_nt(g, t.value(b)));
        if (t.requires_grad(b)) t.accumulate(b, kernels::matmul_tn(t.value(a), g));
    });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
    DenseMatrix<T> out = tape.value(a);
    kernels::axpy(out, tape.value(b));
    const bool rg = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.push(std::move(out), rg, [a, b](Tape<T>& t, const DenseMatrix<T>& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, T factor) {
    DenseMatrix<T> out = tape.value(a);
    for (auto& v : out.values()) v *= factor;
    return tape.push(std::move(out), tape.requires_grad(a), [a, factor](Tape<T>& t, const DenseMatrix<T>& g) {
        DenseMatrix<T> ga = g;
        for (auto& v : ga.values()) v *= factor;
        t.accumulate(a, std::move(ga));
    });
}

/// Elementwise product with a constant mask (dropout).
template <typename T>
Var mul_const(Tape<T>& tape, Var a, DenseMatrix<T> mask) {
    const auto& av = tape.value(a);
    if (!av.same_shape(mask)) throw ShapeError("mul_const: " + shape_str(av) + " vs " + shape_str(mask));
    DenseMatrix<T> out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
    return tape.push(std::move(out), tape.requires_grad(a),
                     [a, m = std::move(mask)](Tape<T>& t, const DenseMatrix<T>& g) {
                         DenseMatrix<T> ga = g;
                         for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] *= m.data()[i];
                         t.accumulate(a, std::move(ga));
                     });
}

/// max(0, x). The subgradient at 0 is 0.
template <typename T>
Var relu(Tape<T>& tape, Var x) {
    DenseMatrix<T> out = tape.value(x);
    for (auto& v : out.values()) v = v > T{0} ? v : T{0};
    return tape.push(std::move(out), tape.requires_grad(x), [x](Tape<T>& t, const DenseMatrix<T>& g) {
        const auto& in = t.value(x);
        DenseMatrix<T> gx = g;
        for (std::size_t i = 0; i < gx.size(); ++i)
            if (!(in.data()[i] > T{0})) gx.data()[i] = T{0};
        t.accumulate(x, std::move(gx));
    });
}

/// Sum of all entries, as a 1x1 matrix.
template <typename T>
Var sum(Tape<T>& tape, Var x) {
    const auto& in = tape.value(x);
    T total{0};
    for (T v : in.values()) total += v;
    return tape.push(DenseMatrix<T>(1, 1, total), tape.requires_grad(x),
                     [x](Tape<T>& t, const DenseMatrix<T>& g) {
                         const auto& in = t.value(x);
                         t.accumulate(x, DenseMatrix<T>(in.rows(), in.cols(), g(0, 0)));
                     });
}

/// Row-wise log-softmax with max subtraction.
/// Backward: dx = g - softmax * rowsum(g).
template <typename T>
Var log_softmax_rows(Tape<T>& tape, Var x) {
    const auto& in = tape.value(x);
    if (in.cols() == 0) throw ShapeError("log_softmax_rows: zero columns");
    DenseMatrix<T> out(in.rows(), in.cols());
    for (std::size_t r = 0; r < in.rows(); ++r) {
        auto src = in.row(r);
        auto dst = out.row(r);
        T mx = src[0];
        for (T v : src) mx = std::max(mx, v);
        // Accumulate in double: the exp-sum must normalize to 1 within 1e-12.
        double acc = 0.0;
        for (T v : src) acc += std::exp(static_cast<double>(v - mx));
        const T lse = mx + static_cast<T>(std::log(acc));
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] - lse;
    }
    const Var self{tape.size()};
    return tape.push(std::move(out), tape.requires_grad(x), [x, self](Tape<T>& t, const DenseMatrix<T>& g) {
        const auto& lp = t.value(self);
        DenseMatrix<T> gx = g;
        for (std::size_t r = 0; r < gx.rows(); ++r) {
            double gsum = 0.0;
            for (T v : g.row(r)) gsum += v;
            auto dst = gx.row(r);
            auto logp = lp.row(r);
            for (std::size_t c = 0; c < dst.size(); ++c)
                dst[c] -= static_cast<T>(std::exp(static_cast<double>(logp[c])) * gsum);
        }
        t.accumulate(x, std::move(gx));
    });
}

/// Mean (or sum) over `mask` of -logp[i, labels[i]], returned as 1x1.
template <typename T>
Var masked_cross_entropy(Tape<T>& tape, Var logp, std::span<const int> labels,
                         std::span<const std::uint32_t> mask, LossReduction reduction = LossReduction::mean) {
    const auto& lp = tape.value(logp);
    if (mask.empty()) throw ShapeError("masked_cross_entropy: empty mask");
    if (labels.size() != lp.rows()) throw ShapeError("masked_cross_entropy: label count does not match rows");
    double total = 0.0;
    for (auto i : mask) {
        if (i >= lp.rows()) throw ShapeError("masked_cross_entropy: mask index out of range");
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= lp.cols())
            throw ShapeError("masked_cross_entropy: label out of range");
        total -= static_cast<double>(lp(i, static_cast<std::size_t>(y)));
    }
    const double weight = reduction == LossReduction::mean ? 1.0 / static_cast<double>(mask.size()) : 1.0;
    std::vector<std::uint32_t> rows(mask.begin(), mask.end());
    std::vector<int> ys;
    ys.reserve(rows.size());
    for (auto i : rows) ys.push_back(labels[i]);
    return tape.push(DenseMatrix<T>(1, 1, static_cast<T>(total * weight)), tape.requires_grad(logp),
                     [logp, weight, rows = std::move(rows), ys = std::move(ys)](Tape<T>& t, const DenseMatrix<T>& g) {
                         const auto& lp = t.value(logp);
                         DenseMatrix<T> gl(lp.rows(), lp.cols());
                         const T step = static_cast<T>(-weight) * g(0, 0);
                         for (std::size_t k = 0; k < rows.size(); ++k)
                             gl(rows[k], static_cast<std::size_t>(ys[k])) += step;
                         t.accumulate(logp, std::move(gl));
                     });
}

/// Centers rows on the column mean, then rescales to Frobenius norm s*sqrt(n).
/// A matrix whose centered form is zero maps to zero with zero gradient.
template <typename T>
Var pairnorm(Tape<T>& tape, Var x, T s) {
    const auto& in = tape.value(x);
    const std::size_t n = in.rows(), d = in.cols();
    DenseMatrix<T> centered = in;
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += in(r, c);
    for (auto& m : mean) m /= static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            centered(r, c) = static_cast<T>(in(r, c) - mean[c]);
            sq += static_cast<double>(centered(r, c)) * centered(r, c);
        }
    const double norm = std::sqrt(sq);
    const double target = static_cast<double>(s) * std::sqrt(static_cast<double>(n));
    DenseMatrix<T> out(n, d);
    if (norm > 0.0) {
        const T f = static_cast<T>(target / norm);
        for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = centered.data()[i] * f;
    }
    return tape.push(std::move(out), tape.requires_grad(x),
                     [x, norm, target, c = std::move(centered)](Tape<T>& t, const DenseMatrix<T>& g) {
                         const std::size_t n = c.rows(), d = c.cols();
                         DenseMatrix<T> gx(n, d);
                         if (norm > 0.0) {
                             double dot = 0.0;
                             for (std::size_t i = 0; i < c.size(); ++i)
                                 dot += static_cast<double>(g.data()[i]) * c.data()[i];
                             const double a = target / norm;
                             const double b = target * dot / (norm * norm * norm);
                             std::vector<double> colmean(d, 0.0);
                             for (std::size_t r = 0; r < n; ++r)
                                 for (std::size_t k = 0; k < d; ++k) {
                                     const double v = a * g(r, k) - b * c(r, k);
                                     gx(r, k) = static_cast<T>(v);
                                     colmean[k] += v;
                                 }
                             for (auto& m : colmean) m /= static_cast<double>(n);
                             for (std::size_t r = 0; r < n; ++r)
                                 for (std::size_t k = 0; k < d; ++k) gx(r, k) -= static_cast<T>(colmean[k]);
                         }
                         t.accumulate(x, std::move(gx));
                     });
}

}  // namespace lgt::ad
