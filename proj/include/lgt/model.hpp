#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lgt/dataset.hpp"
#include "lgt/graph.hpp"
#include "lgt/layers.hpp"
#include "lgt/tape.hpp"

namespace lgt {

/// Constant operators derived from one dataset.
///
/// The first GCN layer computes (L X) W rather than L (X W); both are the same
/// product, but L X is precomputed once as a sparse matrix so the input layer
/// costs nnz(L X) * d instead of n * f * d.
template <typename T>
struct BasicGraphContext {
    SparseOperator laplacian;
    SparseOperator input_propagation;  // L X, n x f
    DenseMatrix<T> features;           // X (row-normalized when requested)
    std::size_t sgc_hops = 0;
    DenseMatrix<T> sgc_features;  // L^sgc_hops X, filled by prepare_sgc

    std::size_t num_nodes() const noexcept { return features.rows(); }
    std::size_t num_features() const noexcept { return features.cols(); }

    void prepare_sgc(std::size_t hops) {
        if (!sgc_features.empty() && sgc_hops == hops) return;
        sgc_hops = hops;
        sgc_features = sgc_propagate(laplacian.matrix(), features, hops);
    }
};

using GraphContext = BasicGraphContext<float>;

template <typename T>
BasicGraphContext<T> make_context(const GraphDataset& data, bool row_normalize_features) {
    BasicGraphContext<T> ctx;
    const MatrixD x = row_normalize_features ? row_normalize(data.features) : data.features;
    ctx.laplacian = SparseOperator(normalized_laplacian(data.adjacency));
    ctx.input_propagation = SparseOperator(sparse_multiply(ctx.laplacian.matrix(), SparseMatrix::from_dense(x)));
    ctx.features = matrix_cast<T>(x);
    return ctx;
}

enum class ParamRole { weight, head, lora_a, lora_b };

/// A tape leaf bound to a stack parameter: layer index is ignored for the head.
struct ParamRef {
    ParamRole role;
    std::size_t layer = 0;
    ad::Var var;
};

template <typename T>
DenseMatrix<T>& resolve(BasicLayerStack<T>& stack, const ParamRef& ref) {
    switch (ref.role) {
        case ParamRole::head:
            return stack.head;
        case ParamRole::weight:
            return stack.layer(ref.layer).weight;
        case ParamRole::lora_a:
            return stack.layer(ref.layer).adapter.value().a;
        case ParamRole::lora_b:
            return stack.layer(ref.layer).adapter.value().b;
    }
    throw ShapeError("resolve: unknown parameter role");
}

template <typename T>
struct ForwardOptions {
    bool training = false;
    /// When false every parameter enters the tape as a constant.
    bool track_grads = false;
    /// Dropout stream; required when training with dropout_p > 0.
    std::mt19937_64* rng = nullptr;
    /// Post-activation output of layers [0, cached_layers), reused instead of
    /// recomputing them. Only valid when those layers are constant.
    const DenseMatrix<T>* cached_prefix = nullptr;
    std::size_t cached_layers = 0;
};

struct ForwardResult {
    ad::Var logits;
    ad::Var log_probs;
    /// Post-activation features per GCN layer (after pairnorm and dropout).
    std::vector<ad::Var> hidden;
    std::vector<ParamRef> params;
};

template <typename T>
ForwardResult forward(ad::Tape<T>& tape, const BasicGraphContext<T>& ctx, const BasicLayerStack<T>& stack,
                      const ForwardOptions<T>& opt) {
    ForwardResult res;
    const bool drop = opt.training && stack.dropout_p > 0.0;
    if (drop && opt.rng == nullptr) throw ShapeError("forward: dropout requires an rng stream");
    const bool track = opt.track_grads;

    auto bind = [&](const WeightNodes<T>& w, std::size_t k) {
        if (w.weight) res.params.push_back({ParamRole::weight, k, *w.weight});
        if (w.lora_a) res.params.push_back({ParamRole::lora_a, k, *w.lora_a});
        if (w.lora_b) res.params.push_back({ParamRole::lora_b, k, *w.lora_b});
    };
    auto finish_layer = [&](ad::Var h) {
        if (stack.pairnorm) h = ad::pairnorm(tape, h, static_cast<T>(stack.pairnorm_scale));
        if (drop) {
            const auto& v = tape.value(h);
            h = ad::mul_const(tape, h, dropout_mask<T>(v.rows(), v.cols(), stack.dropout_p, *opt.rng));
        }
        return h;
    };

    ad::Var h;
    if (stack.architecture == Architecture::sgc) {
        if (ctx.sgc_features.empty() || ctx.sgc_hops != stack.sgc_hops)
            throw ShapeError("forward: context not prepared for " + std::to_string(stack.sgc_hops) + " sgc hops");
        h = tape.constant(ctx.sgc_features);
    } else {
        std::size_t first = 0;
        if (opt.cached_prefix != nullptr && opt.cached_layers > 0) {
            h = tape.constant(*opt.cached_prefix);
            first = opt.cached_layers;
            for (std::size_t k = 0; k < first; ++k) res.hidden.push_back(h);
        }
        for (std::size_t k = first; k < stack.layer_count(); ++k) {
            const auto& layer = stack.layer(k);
            const auto w = weight_nodes(tape, layer, track);
            bind(w, k);
            ad::Var z;
            if (k == 0) {
                z = ad::spmm(tape, ctx.input_propagation, w.effective);
            } else {
                z = ad::matmul(tape, ad::spmm(tape, ctx.laplacian, h), w.effective);
            }
            h = finish_layer(ad::relu(tape, z));
            res.hidden.push_back(h);
        }
    }

    const ad::Var head = track ? tape.variable(stack.head) : tape.constant(stack.head);
    if (track) res.params.push_back({ParamRole::head, 0, head});
    res.logits = ad::matmul(tape, h, head);
    res.log_probs = ad::log_softmax_rows(tape, res.logits);
    return res;
}

/// Eval-mode logits (no dropout, no gradient tracking).
template <typename T>
DenseMatrix<T> predict_logits(const BasicGraphContext<T>& ctx, const BasicLayerStack<T>& stack) {
    ad::Tape<T> tape;
    const auto res = forward(tape, ctx, stack, ForwardOptions<T>{});
    return tape.value(res.logits);
}

/// Eval-mode post-activation features of every GCN layer, index 0 = input X.
template <typename T>
std::vector<DenseMatrix<T>> layer_features(const BasicGraphContext<T>& ctx, const BasicLayerStack<T>& stack) {
    ad::Tape<T> tape;
    const auto res = forward(tape, ctx, stack, ForwardOptions<T>{});
    std::vector<DenseMatrix<T>> out;
    out.push_back(ctx.features);
    if (stack.architecture == Architecture::sgc) {
        out.push_back(ctx.sgc_features);
        return out;
    }
    for (auto v : res.hidden) out.push_back(tape.value(v));
    return out;
}

template <typename T>
std::vector<int> argmax_rows(const DenseMatrix<T>& m) {
    std::vector<int> out(m.rows(), 0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

/// Fraction of mask nodes whose argmax logit equals the label.
template <typename T>
double accuracy(const DenseMatrix<T>& logits, std::span<const int> labels, std::span<const std::uint32_t> mask) {
    if (mask.empty()) throw ShapeError("accuracy: empty mask");
    std::size_t hit = 0;
    for (auto i : mask) {
        auto row = logits.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[best]) best = c;
        hit += static_cast<int>(best) == labels[i];
    }
    return static_cast<double>(hit) / static_cast<double>(mask.size());
}

}  // namespace lgt
