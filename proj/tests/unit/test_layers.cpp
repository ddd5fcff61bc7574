#include <cmath>
#include <random>

#include "doctest.h"
#include "lgt/adam.hpp"
#include "lgt/error.hpp"
#include "lgt/gradcheck_suite.hpp"
#include "lgt/graph.hpp"
#include "lgt/layers.hpp"
#include "lgt/model.hpp"
#include "support.hpp"

using namespace lgt;

namespace {

SparseOperator path_operator(std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
    return SparseOperator(normalized_laplacian(build_adjacency(e, n)));
}

GraphDataset random_dataset(std::size_t n, std::size_t f, std::size_t c, std::mt19937_64& rng) {
    GraphDataset d;
    d.name = "rand";
    d.num_classes = c;
    d.features = testing::random_matrix<double>(n, f, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % c));
    d.adjacency = build_adjacency(testing::connected_edges(n, 0.2, rng), n);
    for (std::uint32_t i = 0; i < n; ++i) (i % 2 ? d.splits.val : d.splits.train).push_back(i);
    return d;
}

}  // namespace

TEST_CASE("gcn_forward examples") {
    const auto l = path_operator(2);
    SUBCASE("2-node path") {
        const GcnLayer layer{Matrix{{1}}, LayerMode::trainable, {}};
        CHECK(gcn_forward(l, Matrix{{1}, {3}}, layer) == Matrix{{2}, {2}});
    }
    SUBCASE("identity weight on nonnegative input is pure propagation") {
        std::mt19937_64 rng(1);
        const auto l5 = path_operator(5);
        const auto h = testing::random_matrix<double>(5, 4, rng, 0.0, 2.0);
        const BasicGcnLayer<double> layer{identity_init<double>(4), LayerMode::trainable, {}};
        CHECK(gcn_forward(l5, h, layer) == kernels::spmm(l5.matrix(), h));
    }
    SUBCASE("adapter with B = 0 matches frozen") {
        std::mt19937_64 rng(2);
        const auto l5 = path_operator(5);
        const auto h = testing::random_matrix<float>(5, 4, rng);
        GcnLayer frozen{testing::random_matrix<float>(4, 3, rng), LayerMode::frozen, {}};
        GcnLayer adapted = frozen;
        adapted.mode = LayerMode::frozen_with_lora;
        adapted.adapter = make_lora_adapter<float>(4, 3, 2, 2.0, rng);
        CHECK(gcn_forward(l5, h, adapted) == gcn_forward(l5, h, frozen));
    }
    SUBCASE("dimension mismatch") {
        const GcnLayer layer{Matrix(3, 2), LayerMode::trainable, {}};
        CHECK_THROWS_AS(gcn_forward(l, Matrix(2, 2), layer), ShapeError);
    }
}

TEST_CASE("lora_effective_weight") {
    const MatrixD w0{{1, 2}, {3, 4}};
    SUBCASE("B = 0") {
        std::mt19937_64 rng(3);
        const auto adp = make_lora_adapter<double>(2, 2, 1, 1.0, rng);
        CHECK(adp.b == MatrixD(1, 2));
        CHECK(lora_effective_weight(w0, adp) == w0);
    }
    SUBCASE("hand example") {
        const BasicLoraAdapter<double> adp{MatrixD{{1}, {0}}, MatrixD{{0, 2}}, 1, 1.0};
        CHECK(lora_effective_weight(w0, adp) == MatrixD{{1, 4}, {3, 4}});
    }
    SUBCASE("alpha / r scaling") {
        const BasicLoraAdapter<double> adp{MatrixD{{1}, {0}}, MatrixD{{0, 2}}, 1, 3.0};
        CHECK(lora_effective_weight(w0, adp) == MatrixD{{1, 8}, {3, 4}});
    }
    SUBCASE("parameter count") {
        std::mt19937_64 rng(4);
        CHECK(make_lora_adapter<float>(16, 64, 10, 10.0, rng).parameter_count() == 10 * (16 + 64));
    }
    SUBCASE("errors") {
        const BasicLoraAdapter<double> adp{MatrixD(3, 1), MatrixD(1, 2), 1, 1.0};
        CHECK_THROWS_AS(lora_effective_weight(w0, adp), ShapeError);
        std::mt19937_64 rng(5);
        CHECK_THROWS_AS(make_lora_adapter<float>(4, 3, 4, 1.0, rng), ShapeError);
        CHECK_THROWS_AS(make_lora_adapter<float>(4, 3, 0, 1.0, rng), ShapeError);
    }
    SUBCASE("A init statistics") {
        std::mt19937_64 rng(6);
        const auto adp = make_lora_adapter<double>(500, 500, 100, 100.0, rng);
        double s = 0, sq = 0;
        for (double v : adp.a.values()) s += v, sq += v * v;
        const double n = static_cast<double>(adp.a.size());
        CHECK(std::abs(s / n) < 3 * 0.02 / std::sqrt(n));
        CHECK(std::sqrt(sq / n) == doctest::Approx(0.02).epsilon(0.02));
    }
}

TEST_CASE("layer validation") {
    GcnLayer l{Matrix(4, 4), LayerMode::frozen_with_lora, {}};
    CHECK_THROWS_AS(l.validate(), ShapeError);
    l.mode = LayerMode::frozen;
    CHECK_NOTHROW(l.validate());
    std::mt19937_64 rng(7);
    l.adapter = make_lora_adapter<float>(4, 4, 2, 2.0, rng);
    CHECK_THROWS_AS(l.validate(), ShapeError);
    l.mode = LayerMode::frozen_with_lora;
    CHECK_NOTHROW(l.validate());
    l.adapter->b = Matrix(2, 3);
    CHECK_THROWS_AS(l.validate(), ShapeError);
    CHECK(std::string(to_string(LayerMode::frozen_with_lora)) == "frozen_with_lora");
}

TEST_CASE("identity_init") {
    const auto i3 = identity_init<double>(3);
    CHECK(i3 == MatrixD{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
}

TEST_CASE("glorot_init") {
    const double a = std::sqrt(6.0 / (250 + 400));
    const auto w = glorot_init<double>(250, 400, std::uint64_t{9});
    CHECK(w.size() == 100000);
    double mean = 0, var = 0;
    for (double v : w.values()) {
        CHECK(std::abs(v) <= a);
        mean += v / 1e5;
    }
    for (double v : w.values()) var += (v - mean) * (v - mean) / (1e5 - 1);
    CHECK(var == doctest::Approx(a * a / 3).epsilon(0.05));
    CHECK(glorot_init<double>(250, 400, std::uint64_t{9}) == w);
    CHECK(glorot_init<double>(250, 400, std::uint64_t{10}) != w);
    CHECK_THROWS_AS(glorot_init<double>(0, 3, std::uint64_t{1}), ShapeError);
}

TEST_CASE("sgc_propagate") {
    std::mt19937_64 rng(10);
    const auto x = testing::random_matrix<double>(4, 3, rng);
    CHECK(sgc_propagate(path_operator(4).matrix(), x, 0) == x);
    CHECK(sgc_propagate(SparseMatrix::identity(4), x, 1) == x);
    CHECK(sgc_propagate(path_operator(2).matrix(), MatrixD{{1}, {3}}, 2) == MatrixD{{2}, {2}});
}

TEST_CASE("pairnorm") {
    std::mt19937_64 rng(11);
    const auto h = testing::random_matrix<double>(9, 5, rng, -2.0, 3.0);
    const PairNormConfig cfg{1.7};
    const auto out = pairnorm(h, cfg);
    double sq = 0;
    for (std::size_t c = 0; c < 5; ++c) {
        double m = 0;
        for (std::size_t r = 0; r < 9; ++r) m += out(r, c) / 9;
        CHECK(std::abs(m) < 1e-6);
    }
    for (double v : out.values()) sq += v * v;
    CHECK(std::abs(std::sqrt(sq) - 1.7 * 3.0) < 1e-5);
    CHECK(testing::max_abs_diff(pairnorm(out, cfg), out) < 1e-6);

    MatrixD constant(4, 3);
    for (std::size_t r = 0; r < 4; ++r) constant(r, 0) = 2, constant(r, 1) = -1, constant(r, 2) = 5;
    CHECK(pairnorm(constant, cfg) == MatrixD(4, 3));
    CHECK_THROWS_AS(pairnorm(h, PairNormConfig{0.0}), ShapeError);
}

TEST_CASE("dropout") {
    std::mt19937_64 rng(12);
    const auto h = testing::random_matrix<double>(4, 5, rng, 0.5, 1.5);
    CHECK(dropout(h, 0.0, true, rng) == h);
    CHECK(dropout(h, 0.5, false, rng) == h);
    CHECK_THROWS_AS(dropout(h, 1.0, true, rng), ShapeError);

    // Each masked copy's entry sum is an unbiased estimate of sum(H) with
    // variance p / (1 - p) * sum(h^2); test the mean of 10^4 copies at 3 sigma.
    const double p = 0.3;
    const int draws = 10000;
    double total = 0, ref = 0, ref_sq = 0;
    for (double v : h.values()) ref += v, ref_sq += v * v;
    for (int k = 0; k < draws; ++k) {
        const auto masked = dropout(h, p, true, rng);
        for (double v : masked.values()) total += v;
    }
    const double sigma = std::sqrt(p / (1 - p) * ref_sq / draws);
    CHECK(std::abs(total / draws - ref) < 3 * sigma);
}

TEST_CASE("LoRA no-op conversion leaves every forward output unchanged") {
    std::mt19937_64 rng(13);
    const auto data = random_dataset(12, 6, 3, rng);
    const auto ctx = make_context<double>(data, true);
    BasicLayerStack<double> stack;
    stack.input.weight = testing::random_matrix<double>(6, 5, rng);
    for (int k = 0; k < 3; ++k) stack.hidden.push_back({testing::random_matrix<double>(5, 5, rng), LayerMode::trainable, {}});
    stack.head = testing::random_matrix<double>(5, 3, rng);
    const auto before = layer_features(ctx, stack);
    const auto logits = predict_logits(ctx, stack);
    for (std::size_t k = 0; k < stack.layer_count(); ++k) {
        auto& l = stack.layer(k);
        l.adapter = make_lora_adapter<double>(l.in_dim(), l.out_dim(), 2, 2.0, rng);
        l.mode = LayerMode::frozen_with_lora;
    }
    const auto after = layer_features(ctx, stack);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(testing::max_abs_diff(before[k], after[k]) <= 1e-12);
    CHECK(testing::max_abs_diff(predict_logits(ctx, stack), logits) <= 1e-12);
}

TEST_CASE("gradient isolation in frozen_with_lora mode") {
    std::mt19937_64 rng(14);
    const auto data = random_dataset(10, 5, 2, rng);
    const auto ctx = make_context<double>(data, true);
    BasicLayerStack<double> stack;
    // Nonnegative input weights and an identity hidden layer keep every unit active.
    stack.input.weight = testing::random_matrix<double>(5, 4, rng, 0.0, 1.0);
    stack.input.mode = LayerMode::frozen_with_lora;
    stack.input.adapter = make_lora_adapter<double>(5, 4, 2, 2.0, rng);
    stack.hidden.push_back({identity_init<double>(4), LayerMode::trainable, {}});
    stack.head = testing::random_matrix<double>(4, 2, rng);
    const MatrixD w0 = stack.input.weight;

    AdamState<double> adam;
    for (int step = 0; step < 25; ++step) {
        ad::Tape<double> tape;
        ForwardOptions<double> opt;
        opt.track_grads = true;
        const auto res = forward(tape, ctx, stack, opt);
        for (const auto& ref : res.params) CHECK_FALSE((ref.layer == 0 && ref.role == ParamRole::weight));
        tape.backward(ad::masked_cross_entropy(tape, res.log_probs, std::span<const int>(data.labels),
                                               std::span<const std::uint32_t>(data.splits.train)));
        std::vector<AdamParam<double>> params;
        for (const auto& ref : res.params) params.push_back({&resolve(stack, ref), &tape.grad(ref.var), 0.05, 0.0});
        adam_step<double>(params, adam);
    }
    CHECK(stack.input.weight == w0);
    CHECK(stack.input.adapter->b != MatrixD(2, 4));

    const auto check = stack_grad_check(ctx, stack, data.labels, data.splits.train, ad::LossReduction::mean, 1e-6);
    CHECK(check.max_rel_error < 1e-6);
}

TEST_CASE("identity stack degenerates to propagation") {
    std::mt19937_64 rng(15);
    const std::size_t c = 4;
    auto data = random_dataset(20, 6, c, rng);
    const auto ctx = make_context<double>(data, true);
    for (std::size_t depth : {1, 2, 5, 9}) {
        BasicLayerStack<double> stack;
        stack.input.weight = testing::random_matrix<double>(6, c, rng, 0.0, 1.0);
        for (std::size_t k = 1; k < depth; ++k) stack.hidden.push_back({identity_init<double>(c), LayerMode::trainable, {}});
        stack.head = identity_init<double>(c);
        const auto expect = testing::naive_matmul(sgc_propagate(ctx.laplacian.matrix(), ctx.features, depth), stack.input.weight);
        CHECK(testing::max_abs_diff(predict_logits(ctx, stack), expect) <= 1e-6);
    }
}

TEST_CASE("forward with dropout needs an rng and changes outputs only in training") {
    std::mt19937_64 rng(16);
    const auto data = random_dataset(10, 4, 2, rng);
    const auto ctx = make_context<float>(data, true);
    LayerStack stack;
    stack.input.weight = testing::random_matrix<float>(4, 3, rng);
    stack.head = testing::random_matrix<float>(3, 2, rng);
    stack.dropout_p = 0.5;
    ad::Tape<float> tape;
    ForwardOptions<float> opt;
    opt.training = true;
    CHECK_THROWS_AS(forward(tape, ctx, stack, opt), ShapeError);
    std::mt19937_64 drop(1);
    opt.rng = &drop;
    const auto res = forward(tape, ctx, stack, opt);
    CHECK(tape.value(res.logits) != predict_logits(ctx, stack));
}
