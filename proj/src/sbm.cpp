#include "lgt/sbm.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "lgt/error.hpp"
#include "lgt/graph.hpp"

namespace lgt {

GraphDataset generate_sbm(const SbmParams& p) {
    if (p.classes == 0 || p.nodes_per_class == 0) throw ShapeError("generate_sbm: classes and nodes_per_class must be positive");
    if (!(p.p_out >= 0.0 && p.p_out <= p.p_in && p.p_in <= 1.0))
        throw ShapeError("generate_sbm: require 0 <= p_out <= p_in <= 1");
    if (!(p.signal >= 0.0)) throw ShapeError("generate_sbm: signal must be nonnegative");
    if (p.feature_dim < p.classes) throw ShapeError("generate_sbm: feature_dim must be at least the class count");

    const std::size_t n = p.classes * p.nodes_per_class;
    const std::size_t train = p.classes * p.train_per_class;
    if (p.nodes_per_class < p.train_per_class) throw DataError("generate_sbm: infeasible split, fewer nodes per class than training picks");
    const std::size_t auto_size = std::min<std::size_t>((n - train) / 2, 1000);
    const std::size_t val = p.val_size ? p.val_size : auto_size;
    const std::size_t test = p.test_size ? p.test_size : auto_size;
    if (train + val + test > n)
        throw DataError("generate_sbm: infeasible split, " + std::to_string(train + val + test) + " nodes requested of " +
                        std::to_string(n));

    std::mt19937_64 rng(p.seed);
    GraphDataset d;
    d.name = "sbm";
    d.num_classes = p.classes;
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(i / p.nodes_per_class);

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double prob = d.labels[i] == d.labels[j] ? p.p_in : p.p_out;
            if (coin(rng) < prob) edges.emplace_back(i, j);
        }
    d.adjacency = build_adjacency(edges, n);

    const std::size_t block = p.feature_dim / p.classes;
    std::normal_distribution<double> noise(0.0, 1.0);
    d.features = MatrixD(n, p.feature_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(d.labels[i]);
        for (std::size_t k = 0; k < p.feature_dim; ++k) {
            const bool in_block = k >= c * block && k < (c + 1) * block;
            d.features(i, k) = (in_block ? p.signal : 0.0) + noise(rng);
        }
    }
    d.splits = split_per_class(d.labels, p.classes, p.train_per_class, val, test, rng());
    return d;
}

}  // namespace lgt
