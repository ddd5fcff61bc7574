#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lgt/sparse.hpp"

namespace lgt {

using Edge = std::pair<std::size_t, std::size_t>;

/// Canonical symmetric 0/1 adjacency from an undirected edge list.
/// Duplicates and self-loops are dropped; either orientation is accepted.
/// Throws DataError naming the first pair with an index outside [0, n).
SparseMatrix build_adjacency(std::span<const Edge> edges, std::size_t n);

/// Row sums of the adjacency (plain degree, without the added self-loop).
std::vector<double> degrees(const SparseMatrix& adjacency);

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
SparseMatrix normalized_laplacian(const SparseMatrix& adjacency);

/// Undirected edge list (i < j) recovered from a symmetric adjacency.
std::vector<Edge> edge_list(const SparseMatrix& adjacency);

}  // namespace lgt
