#include "lgt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lgt/error.hpp"

namespace lgt {

SparseMatrix build_adjacency(std::span<const Edge> edges, std::size_t n) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> directed;
    directed.reserve(edges.size() * 2);
    for (const auto& [i, j] : edges) {
        if (i >= n || j >= n)
            throw DataError("edge (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range for n = " +
                            std::to_string(n));
        if (i == j) continue;
        directed.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        directed.emplace_back(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i));
    }
    std::sort(directed.begin(), directed.end());
    directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

    SparseMatrix a;
    a.n_rows = a.n_cols = n;
    a.row_offsets.assign(n + 1, 0);
    a.col_indices.reserve(directed.size());
    a.values.assign(directed.size(), 1.0);
    for (const auto& [r, c] : directed) {
        ++a.row_offsets[r + 1];
        a.col_indices.push_back(c);
    }
    for (std::size_t r = 0; r < n; ++r) a.row_offsets[r + 1] += a.row_offsets[r];
    return a;
}

std::vector<double> degrees(const SparseMatrix& adjacency) {
    std::vector<double> deg(adjacency.n_rows, 0.0);
    for (std::size_t r = 0; r < adjacency.n_rows; ++r)
        for (std::size_t k = adjacency.row_offsets[r]; k < adjacency.row_offsets[r + 1]; ++k)
            if (adjacency.col_indices[k] != r) deg[r] += adjacency.values[k];
    return deg;
}

SparseMatrix normalized_laplacian(const SparseMatrix& adjacency) {
    const std::size_t n = adjacency.n_rows;
    if (adjacency.n_cols != n) throw ShapeError("normalized_laplacian: adjacency must be square");
    auto deg = degrees(adjacency);
    for (auto& d : deg) d += 1.0;

    SparseMatrix l;
    l.n_rows = l.n_cols = n;
    l.row_offsets.reserve(n + 1);
    l.col_indices.reserve(adjacency.nnz() + n);
    l.values.reserve(adjacency.nnz() + n);
    for (std::size_t r = 0; r < n; ++r) {
        bool diag_done = false;
        auto emit_diag = [&] {
            l.col_indices.push_back(static_cast<std::uint32_t>(r));
            l.values.push_back(1.0 / deg[r]);
            diag_done = true;
        };
        for (std::size_t k = adjacency.row_offsets[r]; k < adjacency.row_offsets[r + 1]; ++k) {
            const std::size_t c = adjacency.col_indices[k];
            if (c == r) continue;  // stored self-loops are ignored; +I supplies the diagonal
            if (!diag_done && c > r) emit_diag();
            l.col_indices.push_back(static_cast<std::uint32_t>(c));
            l.values.push_back(adjacency.values[k] / std::sqrt(deg[r] * deg[c]));
        }
        if (!diag_done) emit_diag();
        l.row_offsets.push_back(l.values.size());
    }
    return l;
}

std::vector<Edge> edge_list(const SparseMatrix& adjacency) {
    std::vector<Edge> out;
    out.reserve(adjacency.nnz() / 2);
    for (std::size_t r = 0; r < adjacency.n_rows; ++r)
        for (std::size_t k = adjacency.row_offsets[r]; k < adjacency.row_offsets[r + 1]; ++k)
            if (adjacency.col_indices[k] > r) out.emplace_back(r, adjacency.col_indices[k]);
    return out;
}

}  // namespace lgt
