#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lgt/dense.hpp"
#include "lgt/kernels.hpp"
#include "lgt/sparse.hpp"
#include "lgt/tape.hpp"

namespace lgt {

enum class LayerMode { trainable, frozen, frozen_with_lora };

const char* to_string(LayerMode mode);

/// Low-rank correction (alpha / rank) * A * B attached to a frozen weight.
template <typename T>
struct BasicLoraAdapter {
    DenseMatrix<T> a;  // d_in x r
    DenseMatrix<T> b;  // r x d_out
    std::size_t rank = 1;
    double alpha = 1.0;

    double scale() const noexcept { return alpha / static_cast<double>(rank); }
    std::size_t parameter_count() const noexcept { return a.size() + b.size(); }
};

template <typename T>
struct BasicGcnLayer {
    DenseMatrix<T> weight;  // W (trainable) or W0 (frozen)
    LayerMode mode = LayerMode::trainable;
    std::optional<BasicLoraAdapter<T>> adapter;

    std::size_t in_dim() const noexcept { return weight.rows(); }
    std::size_t out_dim() const noexcept { return weight.cols(); }

    /// Adapter present iff mode is frozen_with_lora, with matching dims.
    void validate() const {
        if ((mode == LayerMode::frozen_with_lora) != adapter.has_value())
            throw ShapeError("gcn layer: adapter must be present exactly in frozen_with_lora mode");
        if (adapter) {
            const auto& ad = *adapter;
            if (ad.rank < 1 || ad.rank > std::min(in_dim(), out_dim()))
                throw ShapeError("lora: rank " + std::to_string(ad.rank) + " outside [1, min(d_in, d_out)]");
            if (ad.a.rows() != in_dim() || ad.a.cols() != ad.rank || ad.b.rows() != ad.rank || ad.b.cols() != out_dim())
                throw ShapeError("lora: adapter " + shape_str(ad.a) + " x " + shape_str(ad.b) + " does not fit weight " +
                                 shape_str(weight));
        }
    }
};

enum class Architecture { gcn, sgc };

/// Input layer (f x d), hidden layers (d x d), and a linear head.
///
/// For Architecture::sgc there are no GCN layers: the head (f x C) reads
/// features propagated `sgc_hops` times.
template <typename T>
struct BasicLayerStack {
    Architecture architecture = Architecture::gcn;
    std::size_t sgc_hops = 0;
    BasicGcnLayer<T> input;
    std::vector<BasicGcnLayer<T>> hidden;
    DenseMatrix<T> head;
    double dropout_p = 0.0;
    bool pairnorm = false;
    double pairnorm_scale = 1.0;

    /// Number of GCN layers K (propagation count for SGC).
    std::size_t depth() const noexcept {
        return architecture == Architecture::sgc ? sgc_hops : 1 + hidden.size();
    }
    std::size_t layer_count() const noexcept {
        return architecture == Architecture::sgc ? 0 : 1 + hidden.size();
    }
    BasicGcnLayer<T>& layer(std::size_t k) { return k == 0 ? input : hidden.at(k - 1); }
    const BasicGcnLayer<T>& layer(std::size_t k) const { return k == 0 ? input : hidden.at(k - 1); }

    void validate() const {
        if (architecture == Architecture::sgc) {
            if (!hidden.empty()) throw ShapeError("sgc stack must not carry hidden layers");
            return;
        }
        input.validate();
        const std::size_t d = input.out_dim();
        for (const auto& l : hidden) {
            l.validate();
            if (l.in_dim() != d || l.out_dim() != d) throw ShapeError("hidden layers must all be " + shape_str(d, d));
        }
        if (head.rows() != d) throw ShapeError("head " + shape_str(head) + " does not follow hidden width " + std::to_string(d));
    }
};

using LoraAdapter = BasicLoraAdapter<float>;
using GcnLayer = BasicGcnLayer<float>;
using LayerStack = BasicLayerStack<float>;

struct PairNormConfig {
    double s = 1.0;
};

template <typename To, typename From>
BasicLayerStack<To> stack_cast(const BasicLayerStack<From>& in) {
    auto cast_layer = [](const BasicGcnLayer<From>& l) {
        BasicGcnLayer<To> out;
        out.weight = matrix_cast<To>(l.weight);
        out.mode = l.mode;
        if (l.adapter)
            out.adapter = BasicLoraAdapter<To>{matrix_cast<To>(l.adapter->a), matrix_cast<To>(l.adapter->b),
                                               l.adapter->rank, l.adapter->alpha};
        return out;
    };
    BasicLayerStack<To> out;
    out.architecture = in.architecture;
    out.sgc_hops = in.sgc_hops;
    if (in.architecture == Architecture::gcn) out.input = cast_layer(in.input);
    for (const auto& l : in.hidden) out.hidden.push_back(cast_layer(l));
    out.head = matrix_cast<To>(in.head);
    out.dropout_p = in.dropout_p;
    out.pairnorm = in.pairnorm;
    out.pairnorm_scale = in.pairnorm_scale;
    return out;
}

// ---------------------------------------------------------------------------
// Initializers
// ---------------------------------------------------------------------------

template <typename T>
DenseMatrix<T> identity_init(std::size_t d) {
    return DenseMatrix<T>::identity(d);
}

/// Uniform(-a, a) with a = sqrt(6 / (d_in + d_out)).
template <typename T>
DenseMatrix<T> glorot_init(std::size_t d_in, std::size_t d_out, std::mt19937_64& rng) {
    if (d_in == 0 || d_out == 0) throw ShapeError("glorot_init: dims must be >= 1");
    const double a = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    std::uniform_real_distribution<double> dist(-a, a);
    DenseMatrix<T> w(d_in, d_out);
    for (auto& v : w.values()) v = static_cast<T>(dist(rng));
    return w;
}

template <typename T>
DenseMatrix<T> glorot_init(std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return glorot_init<T>(d_in, d_out, rng);
}

/// A ~ N(0, 0.02^2), B = 0: the adapter starts as a no-op.
template <typename T>
BasicLoraAdapter<T> make_lora_adapter(std::size_t d_in, std::size_t d_out, std::size_t rank, double alpha,
                                      std::mt19937_64& rng) {
    if (rank < 1 || rank > std::min(d_in, d_out))
        throw ShapeError("lora: rank " + std::to_string(rank) + " outside [1, " + std::to_string(std::min(d_in, d_out)) + "]");
    std::normal_distribution<double> dist(0.0, 0.02);
    BasicLoraAdapter<T> ad{DenseMatrix<T>(d_in, rank), DenseMatrix<T>(rank, d_out), rank, alpha};
    for (auto& v : ad.a.values()) v = static_cast<T>(dist(rng));
    return ad;
}

/// W0 + (alpha / r) * A * B
template <typename T>
DenseMatrix<T> lora_effective_weight(const DenseMatrix<T>& w0, const BasicLoraAdapter<T>& adapter) {
    if (adapter.a.rows() != w0.rows() || adapter.b.cols() != w0.cols() || adapter.a.cols() != adapter.b.rows())
        throw ShapeError("lora_effective_weight: adapter " + shape_str(adapter.a) + " x " + shape_str(adapter.b) +
                         " does not fit " + shape_str(w0));
    DenseMatrix<T> out = w0;
    kernels::axpy(out, kernels::matmul(adapter.a, adapter.b), static_cast<T>(adapter.scale()));
    return out;
}

/// Weight the layer applies in its current mode.
template <typename T>
DenseMatrix<T> effective_weight(const BasicGcnLayer<T>& layer) {
    return layer.adapter ? lora_effective_weight(layer.weight, *layer.adapter) : layer.weight;
}

// ---------------------------------------------------------------------------
// Tape-level layer pieces
// ---------------------------------------------------------------------------

/// Effective weight as a tape node. Gradients reach W only for trainable
/// layers and A, B only for adapted ones; with `track` false everything is
/// constant.
template <typename T>
struct WeightNodes {
    ad::Var effective;
    std::optional<ad::Var> weight;
    std::optional<ad::Var> lora_a;
    std::optional<ad::Var> lora_b;
};

template <typename T>
WeightNodes<T> weight_nodes(ad::Tape<T>& tape, const BasicGcnLayer<T>& layer, bool track) {
    WeightNodes<T> out;
    switch (layer.mode) {
        case LayerMode::trainable:
            if (track) {
                out.weight = tape.variable(layer.weight);
                out.effective = *out.weight;
            } else {
                out.effective = tape.constant(layer.weight);
            }
            break;
        case LayerMode::frozen:
            out.effective = tape.constant(layer.weight);
            break;
        case LayerMode::frozen_with_lora: {
            const auto& adp = layer.adapter.value();
            if (!track) {
                out.effective = tape.constant(lora_effective_weight(layer.weight, adp));
                break;
            }
            out.lora_a = tape.variable(adp.a);
            out.lora_b = tape.variable(adp.b);
            const auto w0 = tape.constant(layer.weight);
            const auto ab = ad::matmul(tape, *out.lora_a, *out.lora_b);
            out.effective = ad::add(tape, w0, ad::scale(tape, ab, static_cast<T>(adp.scale())));
            break;
        }
    }
    return out;
}

/// sigma(L H W_eff) on the tape.
template <typename T>
ad::Var gcn_layer_node(ad::Tape<T>& tape, const SparseOperator& laplacian, ad::Var h, ad::Var w_eff) {
    const auto propagated = ad::spmm(tape, laplacian, h);
    return ad::relu(tape, ad::matmul(tape, propagated, w_eff));
}

/// Inverted-dropout mask: kept entries scaled by 1 / (1 - p).
template <typename T>
DenseMatrix<T> dropout_mask(std::size_t rows, std::size_t cols, double p, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ShapeError("dropout: p must lie in [0, 1)");
    std::bernoulli_distribution keep(1.0 - p);
    const T kept = static_cast<T>(1.0 / (1.0 - p));
    DenseMatrix<T> mask(rows, cols);
    for (auto& v : mask.values()) v = keep(rng) ? kept : T{0};
    return mask;
}

// ---------------------------------------------------------------------------
// Value-level operations
// ---------------------------------------------------------------------------

/// sigma(L H W_eff) for a single layer in any mode.
template <typename T>
DenseMatrix<T> gcn_forward(const SparseOperator& laplacian, const DenseMatrix<T>& h, const BasicGcnLayer<T>& layer) {
    layer.validate();
    if (h.cols() != layer.in_dim())
        throw ShapeError("gcn_forward: features " + shape_str(h) + " do not match weight " + shape_str(layer.weight));
    ad::Tape<T> tape;
    const auto w = weight_nodes(tape, layer, false);
    return tape.value(gcn_layer_node(tape, laplacian, tape.constant(h), w.effective));
}

/// L^K X: K sparse products, no weights or nonlinearity.
template <typename T>
DenseMatrix<T> sgc_propagate(const SparseMatrix& laplacian, DenseMatrix<T> x, std::size_t hops) {
    for (std::size_t k = 0; k < hops; ++k) x = kernels::spmm(laplacian, x);
    return x;
}

template <typename T>
DenseMatrix<T> pairnorm(const DenseMatrix<T>& h, const PairNormConfig& cfg) {
    if (!(cfg.s > 0.0)) throw ShapeError("pairnorm: s must be positive");
    if (h.rows() == 0) throw ShapeError("pairnorm: needs at least one row");
    ad::Tape<T> tape;
    return tape.value(ad::pairnorm(tape, tape.constant(h), static_cast<T>(cfg.s)));
}

/// Identity when !training or p == 0.
template <typename T>
DenseMatrix<T> dropout(const DenseMatrix<T>& h, double p, bool training, std::mt19937_64& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw ShapeError("dropout: p must lie in [0, 1)");
    if (!training || p == 0.0) return h;
    DenseMatrix<T> out = h;
    const auto mask = dropout_mask<T>(h.rows(), h.cols(), p, rng);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
    return out;
}

}  // namespace lgt
