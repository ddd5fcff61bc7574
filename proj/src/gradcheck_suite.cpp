#include "lgt/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "lgt/dataset.hpp"
#include "lgt/graph.hpp"

namespace lgt {
namespace {

using ad::Tape;
using ad::Var;

/// Value passes through; the gradient is doubled.
Var corrupted(Tape<double>& tape, Var x) {
    return tape.push(tape.value(x), tape.requires_grad(x), [x](Tape<double>& t, const MatrixD& g) {
        MatrixD g2 = g;
        for (auto& v : g2.values()) v *= 2.0;
        t.accumulate(x, std::move(g2));
    });
}

struct Problem {
    std::size_t n, f, d, c;
    GraphDataset data;
    SparseOperator laplacian;
    MatrixD x;
    MatrixD weights;  // n x d, fixed weights for scalarizing matrix outputs
};

MatrixD random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixD m(r, c);
    for (auto& v : m.values()) v = u(rng);
    return m;
}

Problem random_problem(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    Problem p;
    p.n = pick(4, 10);
    p.f = pick(2, 8);
    p.d = pick(2, 8);
    p.c = pick(2, std::min<std::size_t>(4, p.n / 2));

    std::bernoulli_distribution edge(0.35);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < p.n; ++i)
        for (std::size_t j = i + 1; j < p.n; ++j)
            if (edge(rng)) edges.emplace_back(i, j);

    p.data.name = "gradcheck";
    p.data.num_classes = p.c;
    p.data.features = random_matrix(p.n, p.f, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < p.n; ++i) p.data.labels.push_back(static_cast<int>(i % p.c));
    p.data.adjacency = build_adjacency(edges, p.n);
    for (std::uint32_t i = 0; i < p.n; ++i) {
        if (i % 3 == 2)
            p.data.splits.val.push_back(i);
        else
            p.data.splits.train.push_back(i);
    }
    p.laplacian = SparseOperator(normalized_laplacian(p.data.adjacency));
    p.x = p.data.features;
    p.weights = random_matrix(p.n, p.d, rng);
    return p;
}

/// <weights, h>: a generic linear scalarization.
Var weighted_sum(Tape<double>& tape, Var h, const MatrixD& w) {
    return ad::sum(tape, ad::mul_const(tape, h, w));
}

struct Case {
    std::string name;
    std::function<ad::GradCheckResult(const Problem&, std::mt19937_64&, const GradCheckOptions&)> run;
};

std::vector<Case> cases() {
    std::vector<Case> out;

    out.push_back({"spmm_matmul", [](const Problem& p, std::mt19937_64& rng, const GradCheckOptions& o) {
                       auto build = [&](Tape<double>& t, std::span<const Var> v) {
                           const auto z = ad::matmul(t, ad::spmm(t, p.laplacian, v[0]), v[1]);
                           const auto s = weighted_sum(t, z, p.weights);
                           return o.corrupt_backward ? corrupted(t, s) : s;
                       };
                       return ad::grad_check(build, {p.x, random_matrix(p.f, p.d, rng)}, o.eps);
                   }});

    out.push_back({"gcn_trainable", [](const Problem& p, std::mt19937_64& rng, const GradCheckOptions& o) {
                       auto build = [&](Tape<double>& t, std::span<const Var> v) {
                           const auto h1 = gcn_layer_node(t, p.laplacian, v[0], v[1]);
                           const auto h2 = gcn_layer_node(t, p.laplacian, h1, v[2]);
                           const auto s = weighted_sum(t, h2, p.weights);
                           return o.corrupt_backward ? corrupted(t, s) : s;
                       };
                       return ad::grad_check(build, {p.x, random_matrix(p.f, p.d, rng), random_matrix(p.d, p.d, rng)},
                                             o.eps);
                   }});

    out.push_back({"gcn_frozen_lora", [](const Problem& p, std::mt19937_64& rng, const GradCheckOptions& o) {
                       const MatrixD w0 = random_matrix(p.f, p.d, rng);
                       const std::size_t r = std::uniform_int_distribution<std::size_t>(1, std::min(p.f, p.d))(rng);
                       const double scale = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
                       auto build = [&](Tape<double>& t, std::span<const Var> v) {
                           const auto ab = ad::matmul(t, v[0], v[1]);
                           const auto w = ad::add(t, t.constant(w0), ad::scale(t, ab, scale));
                           const auto h = gcn_layer_node(t, p.laplacian, t.constant(p.x), w);
                           const auto s = weighted_sum(t, h, p.weights);
                           return o.corrupt_backward ? corrupted(t, s) : s;
                       };
                       return ad::grad_check(build, {random_matrix(p.f, r, rng), random_matrix(r, p.d, rng)}, o.eps);
                   }});

    out.push_back({"pairnorm", [](const Problem& p, std::mt19937_64& rng, const GradCheckOptions& o) {
                       const double s = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
                       auto build = [&](Tape<double>& t, std::span<const Var> v) {
                           const auto h = ad::pairnorm(t, v[0], s);
                           const auto out = weighted_sum(t, h, p.weights);
                           return o.corrupt_backward ? corrupted(t, out) : out;
                       };
                       return ad::grad_check(build, {random_matrix(p.n, p.d, rng)}, o.eps);
                   }});

    out.push_back({"dropout", [](const Problem& p, std::mt19937_64& rng, const GradCheckOptions& o) {
                       const auto mask = dropout_mask<double>(p.n, p.d, 0.5, rng);
                       auto build = [&](Tape<double>& t, std::span<const Var> v) {
                           const auto out = weighted_sum(t, ad::mul_const(t, ad::relu(t, v[0]), mask), p.weights);
                           return o.corrupt_backward ? corrupted(t, out) : out;
                       };
                       return ad::grad_check(build, {random_matrix(p.n, p.d, rng)}, o.eps);
                   }});

    for (auto red : {ad::LossReduction::mean, ad::LossReduction::sum}) {
        const std::string name = red == ad::LossReduction::mean ? "head_cross_entropy_mean" : "head_cross_entropy_sum";
        out.push_back({name, [red](const Problem& p, std::mt19937_64& rng, const GradCheckOptions& o) {
                           auto build = [&](Tape<double>& t, std::span<const Var> v) {
                               const auto logp = ad::log_softmax_rows(t, ad::matmul(t, v[0], v[1]));
                               const auto loss = ad::masked_cross_entropy(t, logp, std::span<const int>(p.data.labels),
                                                                          std::span<const std::uint32_t>(p.data.splits.train), red);
                               return o.corrupt_backward ? corrupted(t, loss) : loss;
                           };
                           return ad::grad_check(build, {random_matrix(p.n, p.d, rng), random_matrix(p.d, p.c, rng)}, o.eps);
                       }});
    }

    auto model_case = [](std::string name, bool lora, bool pn) {
        return Case{std::move(name), [lora, pn](const Problem& p, std::mt19937_64& rng, const GradCheckOptions& o) {
                        const auto ctx = make_context<double>(p.data, true);
                        BasicLayerStack<double> stack;
                        stack.pairnorm = pn;
                        stack.pairnorm_scale = 1.5;
                        stack.input.weight = random_matrix(p.f, p.d, rng);
                        for (int k = 0; k < 2; ++k) stack.hidden.push_back({random_matrix(p.d, p.d, rng), LayerMode::trainable, {}});
                        stack.head = random_matrix(p.d, p.c, rng);
                        if (lora) {
                            for (std::size_t k = 0; k < 2; ++k) {
                                auto& l = stack.layer(k);
                                auto adp = make_lora_adapter<double>(l.in_dim(), l.out_dim(), 1 + k % std::min(p.f, p.d), 2.0, rng);
                                adp.a = random_matrix(adp.a.rows(), adp.a.cols(), rng);
                                adp.b = random_matrix(adp.b.rows(), adp.b.cols(), rng);
                                l.adapter = std::move(adp);
                                l.mode = LayerMode::frozen_with_lora;
                            }
                        }
                        return stack_grad_check(ctx, stack, p.data.labels, p.data.splits.train, ad::LossReduction::mean, o.eps,
                                                o.corrupt_backward);
                    }};
    };
    out.push_back(model_case("stack_trainable", false, false));
    out.push_back(model_case("stack_lora", true, false));
    out.push_back(model_case("stack_pairnorm", false, true));
    return out;
}

}  // namespace

ad::GradCheckResult stack_grad_check(const BasicGraphContext<double>& ctx, BasicLayerStack<double>& stack,
                                     std::span<const int> labels, std::span<const std::uint32_t> mask,
                                     ad::LossReduction reduction, double eps, bool corrupt_backward) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw ShapeError("grad_check: eps must lie in [1e-7, 1e-3]");
    auto loss_of = [&](Tape<double>& tape, bool track) {
        ForwardOptions<double> opt;
        opt.track_grads = track;
        auto res = forward(tape, ctx, stack, opt);
        auto loss = ad::masked_cross_entropy(tape, res.log_probs, labels, mask, reduction);
        if (corrupt_backward) loss = corrupted(tape, loss);
        return std::pair{res, loss};
    };

    Tape<double> tape;
    const auto [res, loss] = loss_of(tape, true);
    tape.backward(loss);

    ad::GradCheckResult result;
    for (std::size_t p = 0; p < res.params.size(); ++p) {
        const auto& ref = res.params[p];
        MatrixD& param = resolve(stack, ref);
        const MatrixD& analytic = tape.grad(ref.var);
        for (std::size_t e = 0; e < param.size(); ++e) {
            const double saved = param.data()[e];
            auto eval = [&](double v) {
                param.data()[e] = v;
                Tape<double> t;
                const double out = t.value(loss_of(t, false).second)(0, 0);
                if (!std::isfinite(out)) throw NumericalError("grad_check: non-finite objective");
                return out;
            };
            const double up = eval(saved + eps);
            const double down = eval(saved - eps);
            param.data()[e] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic.empty() ? 0.0 : analytic.data()[e];
            const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_param = p;
                result.worst_entry = e;
            }
            ++result.entries_checked;
        }
    }
    return result;
}

GradCheckSuiteResult run_gradcheck_suite(const GradCheckOptions& opt) {
    GradCheckSuiteResult suite;
    for (const auto& c : cases()) {
        GradCheckCaseResult r;
        r.name = c.name;
        for (std::size_t k = 0; k < opt.seeds; ++k) {
            const std::uint64_t seed = opt.first_seed + k;
            const auto problem = random_problem(seed);
            std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
            const auto res = c.run(problem, rng, opt);
            r.entries_checked += res.entries_checked;
            if (k == 0 || res.max_rel_error > r.max_rel_error) {
                r.max_rel_error = res.max_rel_error;
                r.worst_seed = seed;
            }
        }
        r.passed = r.max_rel_error < opt.tolerance;
        suite.passed = suite.passed && r.passed;
        suite.cases.push_back(std::move(r));
    }
    return suite;
}

}  // namespace lgt
