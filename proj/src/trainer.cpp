#include "lgt/trainer.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "lgt/adam.hpp"
#include "lgt/early_stopping.hpp"
#include "lgt/error.hpp"

namespace lgt {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::gcn: return "gcn";
        case Variant::sgc: return "sgc";
        case Variant::gcn_pairnorm: return "gcn+pairnorm";
    }
    return "?";
}

const char* to_string(TrainerKind k) { return k == TrainerKind::standard ? "standard" : "lgt"; }

std::optional<Variant> parse_variant(std::string_view s) {
    if (s == "gcn") return Variant::gcn;
    if (s == "sgc") return Variant::sgc;
    if (s == "gcn+pairnorm" || s == "pairnorm" || s == "gcn_pairnorm") return Variant::gcn_pairnorm;
    return std::nullopt;
}

std::optional<TrainerKind> parse_trainer(std::string_view s) {
    if (s == "standard") return TrainerKind::standard;
    if (s == "lgt") return TrainerKind::lgt;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (depth < 1) throw ShapeError("depth must be >= 1");
    if (hidden < 1) throw ShapeError("hidden width must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ShapeError("lr must be positive");
    if (!(weight_decay >= 0.0)) throw ShapeError("weight decay must be nonnegative");
    if (dropout_p && !(*dropout_p >= 0.0 && *dropout_p < 1.0)) throw ShapeError("dropout must lie in [0, 1)");
    if (max_epochs < 1) throw ShapeError("max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs) throw ShapeError("patience must lie in [1, max_epochs]");
    if (lora_rank < 1) throw ShapeError("lora rank must be >= 1");
    if (lora_alpha && !(*lora_alpha > 0.0)) throw ShapeError("lora alpha must be positive");
    if (lora_lr && !(*lora_lr > 0.0)) throw ShapeError("lora lr must be positive");
    if (pairnorm_s && !(*pairnorm_s > 0.0)) throw ShapeError("pairnorm scale must be positive");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Streams {
    std::mt19937_64 init;
    std::mt19937_64 dropout;

    explicit Streams(std::uint64_t seed) {
        std::seed_seq a{seed, std::uint64_t{0x11}};
        std::seed_seq b{seed, std::uint64_t{0x22}};
        init.seed(a);
        dropout.seed(b);
    }
};

LayerStack initial_stack(const GraphDataset& data, const TrainConfig& cfg, Variant variant, double dropout,
                         std::mt19937_64& rng) {
    LayerStack stack;
    stack.dropout_p = dropout;
    if (variant == Variant::sgc) {
        stack.architecture = Architecture::sgc;
        stack.sgc_hops = cfg.depth;
        stack.head = glorot_init<float>(data.num_features(), data.num_classes, rng);
        return stack;
    }
    stack.pairnorm = variant == Variant::gcn_pairnorm;
    stack.pairnorm_scale = cfg.pairnorm_s.value_or(1.0);
    stack.input.weight = glorot_init<float>(data.num_features(), cfg.hidden, rng);
    stack.head = glorot_init<float>(cfg.hidden, data.num_classes, rng);
    return stack;
}

/// One early-stopped optimization run over whatever the stack marks trainable.
class StageRunner {
public:
    StageRunner(const GraphContext& ctx, const GraphDataset& data, const TrainConfig& cfg, std::mt19937_64& dropout_rng)
        : ctx_(ctx), data_(data), cfg_(cfg), dropout_rng_(dropout_rng) {}

    /// `cached_layers` leading layers are constant and evaluated once.
    StageReport run(LayerStack& stack, std::size_t stage, bool seed_baseline, std::size_t cached_layers) {
        StageReport rep;
        rep.stage = stage;
        rep.trainable_params = trainable_parameter_count(stack);

        Matrix prefix;
        ForwardOptions<float> eval_opt;
        if (cached_layers > 0) {
            prefix = layer_features(ctx_, stack).at(cached_layers);
            eval_opt.cached_prefix = &prefix;
            eval_opt.cached_layers = cached_layers;
        }
        ForwardOptions<float> train_opt = eval_opt;
        train_opt.training = true;
        train_opt.track_grads = true;
        train_opt.rng = &dropout_rng_;

        auto val_acc = [&] {
            ad::Tape<float> tape;
            const auto res = forward(tape, ctx_, stack, eval_opt);
            return accuracy(tape.value(res.logits), data_.labels, data_.splits.val);
        };

        EarlyStopper stopper(cfg_.patience);
        LayerStack best = stack;
        if (seed_baseline) stopper.seed(val_acc());
        AdamState<float> adam;

        for (std::size_t epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
            ad::Tape<float> tape;
            const auto res = forward(tape, ctx_, stack, train_opt);
            const auto loss = ad::masked_cross_entropy(tape, res.log_probs, std::span<const int>(data_.labels),
                                                       std::span<const std::uint32_t>(data_.splits.train),
                                                       cfg_.loss_reduction);
            const double loss_value = tape.value(loss)(0, 0);
            if (!std::isfinite(loss_value))
                throw NumericalError("non-finite training loss at stage " + std::to_string(stage) + ", epoch " +
                                     std::to_string(epoch));
            rep.train_loss.push_back(loss_value);
            tape.backward(loss);

            std::vector<AdamParam<float>> params;
            params.reserve(res.params.size());
            for (const auto& ref : res.params) {
                const bool adapter = ref.role == ParamRole::lora_a || ref.role == ParamRole::lora_b;
                params.push_back({&resolve(stack, ref), &tape.grad(ref.var), adapter ? cfg_.adapter_lr() : cfg_.lr,
                                  adapter ? 0.0 : cfg_.weight_decay});
            }
            try {
                adam_step<float>(params, adam);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " (stage " + std::to_string(stage) + ")");
            }
            ++rep.optimizer_steps;

            const auto decision = stopper.observe(val_acc());
            rep.epochs_run = epoch;
            if (decision.best_epoch == epoch) best = stack;
            if (decision.stop) break;
        }
        rep.best_epoch = stopper.best_epoch();
        rep.best_val_acc = stopper.best_value();
        stack = std::move(best);
        return rep;
    }

private:
    const GraphContext& ctx_;
    const GraphDataset& data_;
    const TrainConfig& cfg_;
    std::mt19937_64& dropout_rng_;
};

void finish_report(TrainReport& rep, const LayerStack& stack, const GraphContext& ctx, const GraphDataset& data) {
    const Matrix logits = predict_logits(ctx, stack);
    rep.val_acc = accuracy(logits, data.labels, data.splits.val);
    rep.test_acc = accuracy(logits, data.labels, data.splits.test);
    rep.collapse = collapse_report(ctx, stack, data.adjacency);
    for (const auto& s : rep.stages) rep.total_optimizer_steps += s.optimizer_steps;
}

GraphContext prepared_context(const GraphDataset& data, const TrainConfig& cfg, Variant variant) {
    data.validate();
    if (data.splits.train.empty() || data.splits.val.empty() || data.splits.test.empty())
        throw DataError("dataset '" + data.name + "' needs non-empty train, val and test splits");
    auto ctx = make_context<float>(data, cfg.row_normalize_features);
    if (variant == Variant::sgc) ctx.prepare_sgc(cfg.depth);
    return ctx;
}

}  // namespace

std::size_t trainable_parameter_count(const LayerStack& stack) {
    std::size_t count = stack.head.size();
    for (std::size_t k = 0; k < stack.layer_count(); ++k) {
        const auto& l = stack.layer(k);
        if (l.mode == LayerMode::trainable) count += l.weight.size();
        if (l.adapter) count += l.adapter->parameter_count();
    }
    return count;
}

TrainResult train_standard(const GraphDataset& data, const TrainConfig& cfg, Variant variant) {
    cfg.validate();
    const auto ctx = prepared_context(data, cfg, variant);
    Streams rng(cfg.seed);

    TrainResult out;
    out.report.trainer = to_string(TrainerKind::standard);
    out.report.variant = to_string(variant);
    out.report.depth = cfg.depth;
    out.report.seed = cfg.seed;
    out.stack = initial_stack(data, cfg, variant, cfg.dropout_for(TrainerKind::standard), rng.init);
    if (variant != Variant::sgc) {
        for (std::size_t k = 1; k < cfg.depth; ++k) {
            GcnLayer layer;
            layer.weight = glorot_init<float>(cfg.hidden, cfg.hidden, rng.init);
            out.stack.hidden.push_back(std::move(layer));
        }
    }

    const auto t0 = Clock::now();
    StageRunner runner(ctx, data, cfg, rng.dropout);
    const auto ts = Clock::now();
    auto rep = runner.run(out.stack, 1, false, 0);
    rep.wall_clock_seconds = seconds_since(ts);
    out.report.stages.push_back(std::move(rep));
    out.report.total_wall_clock = seconds_since(t0);

    finish_report(out.report, out.stack, ctx, data);
    return out;
}

TrainResult train_lgt(const GraphDataset& data, const TrainConfig& cfg, Variant variant, const StageObserver* observer) {
    if (variant == Variant::sgc) throw ShapeError("the staged trainer has no sgc variant");
    cfg.validate();
    const auto ctx = prepared_context(data, cfg, variant);
    Streams rng(cfg.seed);
    const double dropout = cfg.dropout_for(TrainerKind::lgt);

    TrainResult out;
    out.report.trainer = to_string(TrainerKind::lgt);
    out.report.variant = to_string(variant);
    out.report.depth = cfg.depth;
    out.report.seed = cfg.seed;
    LayerStack& stack = out.stack;
    stack = initial_stack(data, cfg, variant, dropout, rng.init);

    auto notify = [&](const std::function<void(std::size_t, const LayerStack&)>& fn, std::size_t s) {
        if (fn) fn(s, stack);
    };

    const auto t0 = Clock::now();
    StageRunner runner(ctx, data, cfg, rng.dropout);
    for (std::size_t s = 1; s <= cfg.depth; ++s) {
        const auto ts = Clock::now();
        if (s > 1) {
            const std::size_t frozen = stack.layer_count();
            if (cfg.use_lora) {
                for (std::size_t k = 0; k < frozen; ++k) {
                    auto& l = stack.layer(k);
                    if (l.adapter) continue;
                    l.adapter = make_lora_adapter<float>(l.in_dim(), l.out_dim(), cfg.lora_rank, cfg.alpha(), rng.init);
                    l.mode = LayerMode::frozen_with_lora;
                }
            }
            GcnLayer fresh;
            fresh.weight = cfg.identity_init ? identity_init<float>(cfg.hidden)
                                             : glorot_init<float>(cfg.hidden, cfg.hidden, rng.init);
            stack.hidden.push_back(std::move(fresh));
        }
        stack.validate();
        if (observer) notify(observer->stage_begin, s);

        const bool constant_prefix = s > 1 && !cfg.use_lora && dropout == 0.0;
        auto rep = runner.run(stack, s, s > 1, constant_prefix ? s - 1 : 0);
        if (observer) notify(observer->stage_trained, s);

        for (std::size_t k = 0; k < stack.layer_count(); ++k) {
            auto& l = stack.layer(k);
            if (l.adapter && cfg.merge_adapters) {
                l.weight = lora_effective_weight(l.weight, *l.adapter);
                l.adapter.reset();
                l.mode = LayerMode::frozen;
            }
            if (l.mode == LayerMode::trainable) l.mode = LayerMode::frozen;
        }
        rep.wall_clock_seconds = seconds_since(ts);
        out.report.stages.push_back(std::move(rep));
        if (observer) notify(observer->stage_end, s);
    }
    out.report.total_wall_clock = seconds_since(t0);

    finish_report(out.report, stack, ctx, data);
    return out;
}

TrainResult train(const GraphDataset& data, const TrainConfig& cfg, TrainerKind kind, Variant variant) {
    return kind == TrainerKind::standard ? train_standard(data, cfg, variant) : train_lgt(data, cfg, variant);
}

double evaluate(const LayerStack& stack, const GraphContext& ctx, std::span<const int> labels,
                std::span<const std::uint32_t> mask) {
    return accuracy(predict_logits(ctx, stack), labels, mask);
}

double evaluate(const LayerStack& stack, const GraphDataset& data, std::span<const std::uint32_t> mask,
                bool row_normalize_features) {
    auto ctx = make_context<float>(data, row_normalize_features);
    if (stack.architecture == Architecture::sgc) ctx.prepare_sgc(stack.sgc_hops);
    return evaluate(stack, ctx, data.labels, mask);
}

}  // namespace lgt
