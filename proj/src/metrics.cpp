#include "lgt/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "lgt/error.hpp"
#include "lgt/graph.hpp"

namespace lgt {
namespace {

template <typename T>
double distance_to_constant_impl(const DenseMatrix<T>& h) {
    if (h.rows() == 0) throw ShapeError("distance_to_constant: needs at least one row");
    std::vector<double> mean(h.cols(), 0.0);
    for (std::size_t r = 0; r < h.rows(); ++r)
        for (std::size_t c = 0; c < h.cols(); ++c) mean[c] += h(r, c);
    for (auto& m : mean) m /= static_cast<double>(h.rows());
    double dev = 0.0, total = 0.0;
    for (std::size_t r = 0; r < h.rows(); ++r)
        for (std::size_t c = 0; c < h.cols(); ++c) {
            const double v = h(r, c);
            dev += (v - mean[c]) * (v - mean[c]);
            total += v * v;
        }
    return std::sqrt(dev) / std::max(std::sqrt(total), 1e-12);
}

template <typename T>
double dirichlet_energy_impl(const DenseMatrix<T>& h, const SparseMatrix& adjacency) {
    if (adjacency.n_rows != h.rows()) throw ShapeError("dirichlet_energy: adjacency does not match feature rows");
    const auto deg = degrees(adjacency);
    std::vector<double> inv_sqrt(deg.size());
    for (std::size_t i = 0; i < deg.size(); ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i] + 1.0);
    double energy = 0.0;
    for (std::size_t i = 0; i < adjacency.n_rows; ++i)
        for (std::size_t k = adjacency.row_offsets[i]; k < adjacency.row_offsets[i + 1]; ++k) {
            const std::size_t j = adjacency.col_indices[k];
            double sq = 0.0;
            for (std::size_t c = 0; c < h.cols(); ++c) {
                const double diff = h(i, c) * inv_sqrt[i] - h(j, c) * inv_sqrt[j];
                sq += diff * diff;
            }
            energy += adjacency.values[k] * sq;
        }
    return 0.5 * energy;
}

std::string format_real(float v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

double distance_to_constant(const MatrixD& h) { return distance_to_constant_impl(h); }
double distance_to_constant(const Matrix& h) { return distance_to_constant_impl(h); }
double dirichlet_energy(const MatrixD& h, const SparseMatrix& a) { return dirichlet_energy_impl(h, a); }
double dirichlet_energy(const Matrix& h, const SparseMatrix& a) { return dirichlet_energy_impl(h, a); }

CollapseReport collapse_report(const GraphContext& ctx, const LayerStack& stack, const SparseMatrix& adjacency) {
    const auto feats = layer_features(ctx, stack);
    CollapseReport report;
    for (std::size_t k = 1; k < feats.size(); ++k)
        report.per_layer.push_back({distance_to_constant(feats[k]), dirichlet_energy(feats[k], adjacency)});
    if (!report.per_layer.empty()) {
        report.distance_to_constant = report.per_layer.back().distance_to_constant;
        report.dirichlet_energy = report.per_layer.back().dirichlet_energy;
    }
    return report;
}

void export_embeddings(const GraphContext& ctx, const LayerStack& stack, std::span<const int> labels,
                       std::size_t layer_index, const std::filesystem::path& path) {
    const std::size_t max_index = stack.architecture == Architecture::sgc ? 1 : stack.layer_count();
    if (layer_index > max_index)
        throw ShapeError("export_embeddings: layer index " + std::to_string(layer_index) + " outside [0, " +
                         std::to_string(max_index) + "]");
    const auto feats = layer_features(ctx, stack);
    const Matrix& h = feats.at(layer_index);
    if (labels.size() != h.rows()) throw ShapeError("export_embeddings: label count does not match node count");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "node_id,label";
    for (std::size_t c = 0; c < h.cols(); ++c) out << ",dim_" << c;
    out << '\n';
    for (std::size_t r = 0; r < h.rows(); ++r) {
        out << r << ',' << labels[r];
        for (float v : h.row(r)) out << ',' << format_real(v);
        out << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace lgt
