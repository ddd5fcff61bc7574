#include "lgt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "lgt/error.hpp"

namespace lgt {

void Splits::validate(std::size_t n) const {
    std::vector<char> owner(n, 0);
    auto mark = [&](const IndexSet& set, char tag, const char* name) {
        for (auto i : set) {
            if (i >= n) throw DataError(std::string("split '") + name + "' index " + std::to_string(i) + " out of range");
            if (owner[i] == tag) throw DataError(std::string("split '") + name + "' repeats index " + std::to_string(i));
            if (owner[i] != 0)
                throw DataError(std::string("splits are not disjoint: index ") + std::to_string(i) + " appears in '" +
                                name + "' and an earlier split");
            owner[i] = tag;
        }
    };
    mark(train, 1, "train");
    mark(val, 2, "val");
    mark(test, 3, "test");
}

void GraphDataset::validate() const {
    const std::size_t n = num_nodes();
    if (features.rows() != n)
        throw DataError("features have " + std::to_string(features.rows()) + " rows, expected " + std::to_string(n));
    if (!features.all_finite()) throw DataError("features contain non-finite values");
    if (num_classes == 0) throw DataError("class count must be positive");
    std::vector<char> seen(num_classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
            throw DataError("label " + std::to_string(labels[i]) + " of node " + std::to_string(i) + " outside [0, " +
                            std::to_string(num_classes) + ")");
        seen[static_cast<std::size_t>(labels[i])] = 1;
    }
    for (std::size_t c = 0; c < num_classes; ++c)
        if (!seen[c]) throw DataError("class " + std::to_string(c) + " never appears in labels");
    if (adjacency.n_rows != n || adjacency.n_cols != n) throw DataError("adjacency shape does not match node count");
    try {
        adjacency.validate();
    } catch (const ShapeError& e) {
        throw DataError(std::string("adjacency: ") + e.what());
    }
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = adjacency.row_offsets[r]; k < adjacency.row_offsets[r + 1]; ++k)
            if (adjacency.col_indices[k] == r) throw DataError("adjacency stores a self-loop at node " + std::to_string(r));
    if (!adjacency.is_symmetric()) throw DataError("adjacency is not symmetric");
    splits.validate(n);
}

Splits split_per_class(std::span<const int> labels, std::size_t num_classes, std::size_t per_class,
                       std::size_t val_size, std::size_t test_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<IndexSet> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
            throw DataError("split_per_class: label out of range at node " + std::to_string(i));
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<std::uint32_t>(i));
    }
    Splits s;
    IndexSet rest;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& members = by_class[c];
        if (members.size() < per_class)
            throw DataError("split_per_class: class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                            " nodes, need " + std::to_string(per_class));
        std::shuffle(members.begin(), members.end(), rng);
        s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(per_class));
        rest.insert(rest.end(), members.begin() + static_cast<std::ptrdiff_t>(per_class), members.end());
    }
    if (rest.size() < val_size + test_size)
        throw DataError("split_per_class: " + std::to_string(rest.size()) + " nodes remain but val+test need " +
                        std::to_string(val_size + test_size));
    std::sort(rest.begin(), rest.end());
    std::shuffle(rest.begin(), rest.end(), rng);
    s.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(val_size));
    s.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(val_size),
                  rest.begin() + static_cast<std::ptrdiff_t>(val_size + test_size));
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

MatrixD row_normalize(const MatrixD& features) {
    MatrixD out = features;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        double norm = 0.0;
        for (double v : row) norm += std::abs(v);
        if (norm == 0.0) continue;
        for (double& v : row) v /= norm;
    }
    return out;
}

}  // namespace lgt
