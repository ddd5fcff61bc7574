#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lgt/dense.hpp"
#include "lgt/sparse.hpp"

namespace lgt {

using IndexSet = std::vector<std::uint32_t>;

struct Splits {
    IndexSet train;
    IndexSet val;
    IndexSet test;

    /// Throws DataError when sets overlap or leave [0, n).
    void validate(std::size_t n) const;
};

struct GraphDataset {
    std::string name;
    std::size_t num_classes = 0;
    MatrixD features;         // n x f
    std::vector<int> labels;  // n, each in [0, num_classes)
    SparseMatrix adjacency;   // symmetric, no self-loops
    Splits splits;

    std::size_t num_nodes() const noexcept { return labels.size(); }
    std::size_t num_features() const noexcept { return features.cols(); }
    /// Undirected edge count.
    std::size_t num_edges() const noexcept { return adjacency.nnz() / 2; }

    /// Checks every dataset invariant eagerly; throws DataError.
    void validate() const;
};

/// Draws `per_class` training nodes from every class, then `val_size` and
/// `test_size` nodes from the remainder without replacement.
Splits split_per_class(std::span<const int> labels, std::size_t num_classes, std::size_t per_class,
                       std::size_t val_size, std::size_t test_size, std::uint64_t seed);

/// Scales each row to unit L1 norm; all-zero rows are left unchanged.
/// For nonnegative features this is the usual row-sum normalization.
MatrixD row_normalize(const MatrixD& features);

}  // namespace lgt
