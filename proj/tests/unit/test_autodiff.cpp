#include <cmath>
#include <random>

#include "doctest.h"
#include "lgt/error.hpp"
#include "lgt/grad_check.hpp"
#include "lgt/gradcheck_suite.hpp"
#include "lgt/graph.hpp"
#include "lgt/kernels.hpp"
#include "lgt/tape.hpp"
#include "support.hpp"

using namespace lgt;
using ad::Tape;
using ad::Var;

namespace {

SparseOperator path2() {
    const std::vector<Edge> e{{0, 1}};
    return SparseOperator(normalized_laplacian(build_adjacency(e, 2)));
}

}  // namespace

TEST_CASE("spmm examples") {
    std::mt19937_64 rng(1);
    const auto x = testing::random_matrix<double>(4, 3, rng);
    CHECK(kernels::spmm(SparseMatrix::identity(4), x) == x);
    CHECK(kernels::spmm(path2().matrix(), MatrixD{{1}, {3}}) == MatrixD{{2}, {2}});

    SparseMatrix zero_row = SparseMatrix::from_dense(MatrixD{{1, 0}, {0, 0}});
    const auto out = kernels::spmm(zero_row, MatrixD{{2, 3}, {4, 5}});
    CHECK(out(1, 0) == 0.0);
    CHECK(out(1, 1) == 0.0);
    CHECK_THROWS_AS(kernels::spmm(zero_row, MatrixD(3, 1)), ShapeError);
}

TEST_CASE("spmm agrees with dense multiplication") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + rng() % 50;
        const auto edges = testing::random_edges(n, 0.2, rng);
        const auto l = normalized_laplacian(build_adjacency(edges, n));
        const auto x = testing::random_matrix<double>(n, 5, rng);
        const auto ref = testing::naive_matmul(testing::dense_laplacian(n, edges), x);
        const auto got = kernels::spmm(l, x);
        double scale = 1e-300;
        for (double v : ref.values()) scale = std::max(scale, std::abs(v));
        CHECK(testing::max_abs_diff(got, ref) <= 1e-12 * scale);
    }
}

TEST_CASE("matmul examples") {
    std::mt19937_64 rng(3);
    const auto x = testing::random_matrix<double>(3, 4, rng);
    CHECK(kernels::matmul(x, MatrixD::identity(4)) == x);
    CHECK(kernels::matmul(MatrixD{{2}}, MatrixD{{3}}) == MatrixD{{6}});
    CHECK_THROWS_AS(kernels::matmul(x, MatrixD(3, 3)), ShapeError);
    const auto y = testing::random_matrix<double>(4, 5, rng);
    CHECK(testing::max_abs_diff(kernels::matmul(x, y), testing::naive_matmul(x, y)) < 1e-14);
}

TEST_CASE("gradient of sum(XW) with respect to W is X^T ones") {
    std::mt19937_64 rng(4);
    const auto x = testing::random_matrix<double>(5, 3, rng);
    Tape<double> t;
    const auto w = t.variable(testing::random_matrix<double>(3, 2, rng));
    const auto s = ad::sum(t, ad::matmul(t, t.constant(x), w));
    t.backward(s);
    MatrixD expect(3, 2);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 5; ++i) expect(k, 0) = expect(k, 1) = expect(k, 0) + x(i, k);
    CHECK(testing::max_abs_diff(t.grad(w), expect) < 1e-14);
}

TEST_CASE("relu forward and backward") {
    Tape<double> t;
    const auto x = t.variable(MatrixD{{-1, 2, 0}});
    const auto y = ad::relu(t, x);
    CHECK(t.value(y) == MatrixD{{0, 2, 0}});
    t.backward(ad::sum(t, y));
    CHECK(t.grad(x) == MatrixD{{0, 1, 0}});

    Tape<double> t2;
    const MatrixD pos{{0.5, 3}, {0, 1}};
    CHECK(t2.value(ad::relu(t2, t2.constant(pos))) == pos);
}

TEST_CASE("log_softmax_rows") {
    Tape<double> t;
    const auto lp = t.value(ad::log_softmax_rows(t, t.constant(MatrixD{{0, 0}, {1000, 0}, {-3, 7}})));
    CHECK(lp(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(lp(0, 1) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(std::abs(lp(1, 0)) < 1e-300);
    CHECK(lp(1, 1) == doctest::Approx(-1000.0));
    CHECK(lp.all_finite());
    for (std::size_t r = 0; r < lp.rows(); ++r) {
        double s = 0;
        for (double v : lp.row(r)) s += std::exp(v);
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("masked_cross_entropy") {
    const std::vector<int> labels{0, 1, 1};
    const std::vector<std::uint32_t> all{0, 1, 2};
    SUBCASE("perfect prediction") {
        Tape<double> t;
        const auto loss = ad::masked_cross_entropy(t, t.constant(MatrixD{{0, -50}, {-50, 0}, {-50, 0}}), labels, all);
        CHECK(t.value(loss)(0, 0) == 0.0);
    }
    SUBCASE("uniform prediction") {
        Tape<double> t;
        const double l3 = std::log(3.0);
        const auto logp = t.constant(MatrixD{{-l3, -l3, -l3}, {-l3, -l3, -l3}, {-l3, -l3, -l3}});
        CHECK(t.value(ad::masked_cross_entropy(t, logp, labels, all))(0, 0) == doctest::Approx(l3));
    }
    SUBCASE("hand example") {
        Tape<double> t;
        const std::vector<int> y{0};
        const std::vector<std::uint32_t> m{0};
        const auto loss = ad::masked_cross_entropy(t, ad::log_softmax_rows(t, t.constant(MatrixD{{2, 0}})), y, m);
        CHECK(t.value(loss)(0, 0) == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-14));
        CHECK(t.value(loss)(0, 0) == doctest::Approx(0.1269).epsilon(1e-3));
    }
    SUBCASE("mean backward puts -1/|mask| on the labels") {
        Tape<double> t;
        const auto logp = t.variable(MatrixD(3, 2));
        const std::vector<std::uint32_t> m{0, 2};
        t.backward(ad::masked_cross_entropy(t, logp, labels, m));
        CHECK(t.grad(logp) == MatrixD{{-0.5, 0}, {0, 0}, {0, -0.5}});
    }
    SUBCASE("sum reduction") {
        Tape<double> t;
        const auto logp = t.variable(MatrixD{{-1, -2}, {-3, -4}, {-5, -6}});
        const auto loss = ad::masked_cross_entropy(t, logp, labels, all, ad::LossReduction::sum);
        CHECK(t.value(loss)(0, 0) == doctest::Approx(1 + 4 + 6));
        t.backward(loss);
        CHECK(t.grad(logp)(1, 1) == -1.0);
    }
    SUBCASE("empty mask") {
        Tape<double> t;
        CHECK_THROWS_AS(ad::masked_cross_entropy(t, t.constant(MatrixD(3, 2)), labels, {}), ShapeError);
    }
}

TEST_CASE("fan-out accumulates additively") {
    std::mt19937_64 rng(5);
    const auto x = testing::random_matrix<double>(4, 3, rng);
    const auto w0 = testing::random_matrix<double>(3, 2, rng);
    Tape<double> once;
    const auto w1 = once.variable(w0);
    once.backward(ad::sum(once, ad::matmul(once, once.constant(x), w1)));
    Tape<double> twice;
    const auto w2 = twice.variable(w0);
    const auto xw = ad::matmul(twice, twice.constant(x), w2);
    twice.backward(ad::add(twice, ad::sum(twice, xw), ad::sum(twice, xw)));
    for (std::size_t i = 0; i < w0.size(); ++i) CHECK(twice.grad(w2).data()[i] == 2.0 * once.grad(w1).data()[i]);
}

TEST_CASE("backward rejects non-scalar targets") {
    Tape<double> t;
    const auto v = t.variable(MatrixD(2, 2));
    CHECK_THROWS_AS(t.backward(v), ShapeError);
}

TEST_CASE("pairnorm op") {
    std::mt19937_64 rng(6);
    const auto h = testing::random_matrix<double>(7, 4, rng);
    Tape<double> t;
    const auto out = t.value(ad::pairnorm(t, t.constant(h), 2.0));
    double sq = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0;
        for (std::size_t r = 0; r < 7; ++r) mean += out(r, c) / 7;
        CHECK(std::abs(mean) < 1e-12);
    }
    for (double v : out.values()) sq += v * v;
    CHECK(std::sqrt(sq) == doctest::Approx(2.0 * std::sqrt(7.0)));
}

TEST_CASE("grad_check: one GCN layer with cross-entropy on 5 nodes") {
    std::mt19937_64 rng(7);
    const auto edges = testing::connected_edges(5, 0.3, rng);
    const SparseOperator l(normalized_laplacian(build_adjacency(edges, 5)));
    const auto x = testing::random_matrix<double>(5, 3, rng, 0, 1);
    const std::vector<int> y{0, 1, 0, 1, 1};
    const std::vector<std::uint32_t> mask{0, 1, 3};
    auto build = [&](Tape<double>& t, std::span<const Var> p) {
        const auto h = ad::relu(t, ad::matmul(t, ad::spmm(t, l, t.constant(x)), p[0]));
        return ad::masked_cross_entropy(t, ad::log_softmax_rows(t, ad::matmul(t, h, p[1])), y, mask);
    };
    const auto res = ad::grad_check(build, {testing::random_matrix<double>(3, 4, rng), testing::random_matrix<double>(4, 2, rng)});
    CHECK(res.entries_checked == 12 + 8);
    CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("grad_check: linear function is exact to rounding") {
    std::mt19937_64 rng(8);
    const auto x = testing::random_matrix<double>(4, 3, rng);
    auto build = [&](Tape<double>& t, std::span<const Var> p) { return ad::sum(t, ad::matmul(t, t.constant(x), p[0])); };
    CHECK(ad::grad_check(build, {testing::random_matrix<double>(3, 2, rng)}).max_rel_error < 1e-8);
}

TEST_CASE("grad_check: corrupted backward is caught") {
    std::mt19937_64 rng(9);
    const auto x = testing::random_matrix<double>(4, 3, rng);
    auto build = [&](Tape<double>& t, std::span<const Var> p) {
        const auto y = ad::sum(t, ad::matmul(t, t.constant(x), p[0]));
        // Same value, gradient scaled by 3.
        return t.push(t.value(y), true, [y](Tape<double>& tt, const MatrixD& g) {
            MatrixD g3 = g;
            g3(0, 0) *= 3;
            tt.accumulate(y, g3);
        });
    };
    CHECK(ad::grad_check(build, {testing::random_matrix<double>(3, 2, rng)}).max_rel_error > 1e-2);
}

TEST_CASE("grad_check: argument validation") {
    auto build = [](Tape<double>& t, std::span<const Var> p) { return ad::sum(t, p[0]); };
    CHECK_THROWS_AS(ad::grad_check(build, {MatrixD(1, 1)}, 1e-8), ShapeError);
    CHECK_THROWS_AS(ad::grad_check(build, {MatrixD(1, 1)}, 1e-2), ShapeError);
    CHECK_THROWS_AS(ad::grad_check(build, {MatrixD(1, 1, std::nan(""))}), NumericalError);
}

TEST_CASE("every backward rule passes over 100 seeds") {
    GradCheckOptions opt;
    const auto suite = run_gradcheck_suite(opt);
    CHECK(suite.cases.size() >= 9);
    for (const auto& c : suite.cases) {
        INFO(c.name << " worst seed " << c.worst_seed);
        CHECK(c.max_rel_error < 1e-6);
    }
    opt.eps = 1e-5;
    CHECK(run_gradcheck_suite(opt).passed);
    opt.seeds = 3;
    opt.corrupt_backward = true;
    CHECK_FALSE(run_gradcheck_suite(opt).passed);
}
