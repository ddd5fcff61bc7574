#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "lgt/dataset.hpp"
#include "lgt/dense.hpp"
#include "lgt/graph.hpp"

namespace testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("lgt_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<lgt::Edge> random_edges(std::size_t n, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    std::vector<lgt::Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) edges.emplace_back(i, j);
    return edges;
}

/// Path 0-1-..-(n-1) plus random chords, so the graph is connected.
inline std::vector<lgt::Edge> connected_edges(std::size_t n, double p, std::mt19937_64& rng) {
    auto edges = random_edges(n, p, rng);
    for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return edges;
}

template <typename T>
lgt::DenseMatrix<T> random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    lgt::DenseMatrix<T> m(r, c);
    for (auto& v : m.values()) v = static_cast<T>(u(rng));
    return m;
}

/// Plain triple loop, independent of the library kernels.
template <typename T>
lgt::DenseMatrix<T> naive_matmul(const lgt::DenseMatrix<T>& a, const lgt::DenseMatrix<T>& b) {
    lgt::DenseMatrix<T> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            long double s = 0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
            out(i, j) = static_cast<T>(s);
        }
    return out;
}

/// Dense augmented normalized adjacency built straight from the edge list.
inline lgt::MatrixD dense_laplacian(std::size_t n, const std::vector<lgt::Edge>& edges) {
    lgt::MatrixD a(n, n);
    for (auto [i, j] : edges)
        if (i != j) a(i, j) = a(j, i) = 1.0;
    std::vector<double> deg(n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
    lgt::MatrixD l(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) l(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt(deg[i] * deg[j]);
    return l;
}

template <typename T>
double max_abs_diff(const lgt::DenseMatrix<T>& a, const lgt::DenseMatrix<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

}  // namespace testing
