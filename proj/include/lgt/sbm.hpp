#pragma once

#include <cstddef>
#include <cstdint>

#include "lgt/dataset.hpp"

namespace lgt {

struct SbmParams {
    std::size_t classes = 4;
    std::size_t nodes_per_class = 100;
    double p_in = 0.1;
    double p_out = 0.01;
    std::size_t feature_dim = 32;
    /// Height of the class-mean block; noise is unit Gaussian.
    double signal = 2.0;
    std::uint64_t seed = 0;
    std::size_t train_per_class = 20;
    /// 0 selects half of the non-training nodes, capped at 1000.
    std::size_t val_size = 0;
    std::size_t test_size = 0;
};

/// Stochastic block model with nodes_per_class nodes per class, labels in
/// node order. Class c's feature mean is `signal` on the c-th block of
/// feature_dim / classes coordinates. Deterministic under seed.
GraphDataset generate_sbm(const SbmParams& params);

}  // namespace lgt
