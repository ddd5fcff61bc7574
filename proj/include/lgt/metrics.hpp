#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "lgt/dataset.hpp"
#include "lgt/dense.hpp"
#include "lgt/layers.hpp"
#include "lgt/model.hpp"
#include "lgt/sparse.hpp"

namespace lgt {

struct LayerCollapse {
    double distance_to_constant = 0.0;
    double dirichlet_energy = 0.0;
};

struct CollapseReport {
    double distance_to_constant = 0.0;
    double dirichlet_energy = 0.0;
    /// One entry per GCN layer output, in order.
    std::vector<LayerCollapse> per_layer;
};

/// ||H - 1 mean_row(H)||_F / max(||H||_F, 1e-12). 0 when all rows agree.
double distance_to_constant(const MatrixD& h);
double distance_to_constant(const Matrix& h);

/// 1/2 sum over ordered adjacent pairs (i, j) of
/// || h_i / sqrt(d_i + 1) - h_j / sqrt(d_j + 1) ||^2.
double dirichlet_energy(const MatrixD& h, const SparseMatrix& adjacency);
double dirichlet_energy(const Matrix& h, const SparseMatrix& adjacency);

/// Metrics of the final hidden features plus every layer.
CollapseReport collapse_report(const GraphContext& ctx, const LayerStack& stack, const SparseMatrix& adjacency);

/// Writes "node_id,label,dim_0..dim_{d-1}" then one row per node with the
/// eval-mode post-activation features of `layer_index` (0 = input features).
void export_embeddings(const GraphContext& ctx, const LayerStack& stack, std::span<const int> labels,
                       std::size_t layer_index, const std::filesystem::path& path);

}  // namespace lgt
