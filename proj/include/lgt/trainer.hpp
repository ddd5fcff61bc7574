#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgt/dataset.hpp"
#include "lgt/layers.hpp"
#include "lgt/metrics.hpp"
#include "lgt/model.hpp"
#include "lgt/tape.hpp"

namespace lgt {

enum class Variant { gcn, sgc, gcn_pairnorm };
enum class TrainerKind { standard, lgt };

const char* to_string(Variant v);
const char* to_string(TrainerKind k);
std::optional<Variant> parse_variant(std::string_view s);
std::optional<TrainerKind> parse_trainer(std::string_view s);

struct TrainConfig {
    std::size_t depth = 2;
    std::size_t hidden = 64;
    double lr = 0.01;
    double weight_decay = 5e-4;
    /// Unset: 0.5 for the standard trainer, 0 for LGT stages.
    std::optional<double> dropout_p;
    std::size_t max_epochs = 500;
    std::size_t patience = 50;
    std::size_t lora_rank = 10;
    /// Unset: equal to lora_rank, so the adapter multiplier is 1.
    std::optional<double> lora_alpha;
    /// Unset: equal to lr.
    std::optional<double> lora_lr;
    std::uint64_t seed = 0;
    ad::LossReduction loss_reduction = ad::LossReduction::mean;
    bool merge_adapters = true;
    /// PairNorm scale for Variant::gcn_pairnorm; unset means 1.
    std::optional<double> pairnorm_s;
    bool row_normalize_features = true;
    /// LGT switches for the ablation grid: adapters on frozen layers, and
    /// identity (rather than glorot) initialization of added layers.
    bool use_lora = true;
    bool identity_init = true;

    double dropout_for(TrainerKind k) const { return dropout_p.value_or(k == TrainerKind::standard ? 0.5 : 0.0); }
    double alpha() const { return lora_alpha.value_or(static_cast<double>(lora_rank)); }
    double adapter_lr() const { return lora_lr.value_or(lr); }

    /// Throws ShapeError naming the first violated constraint.
    void validate() const;
};

struct StageReport {
    std::size_t stage = 1;
    std::size_t epochs_run = 0;
    /// 0 means the pre-update state of the stage was never beaten.
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    std::vector<double> train_loss;
    double wall_clock_seconds = 0.0;
    std::size_t trainable_params = 0;
    std::size_t optimizer_steps = 0;
};

struct TrainReport {
    std::string trainer;
    std::string variant;
    std::size_t depth = 0;
    std::uint64_t seed = 0;
    std::vector<StageReport> stages;
    double val_acc = 0.0;
    double test_acc = 0.0;
    CollapseReport collapse;
    double total_wall_clock = 0.0;
    std::size_t total_optimizer_steps = 0;
};

struct TrainResult {
    LayerStack stack;
    TrainReport report;
};

/// Hooks into the staged controller; any may be empty. `stage_begin` sees
/// the stack with the new layer and fresh adapters before any update,
/// `stage_trained` sees it after best-val restore but before merge/freeze,
/// `stage_end` after merge and freeze.
struct StageObserver {
    std::function<void(std::size_t stage, const LayerStack&)> stage_begin;
    std::function<void(std::size_t stage, const LayerStack&)> stage_trained;
    std::function<void(std::size_t stage, const LayerStack&)> stage_end;
};

/// Trains the full stack jointly with early stopping on validation accuracy.
TrainResult train_standard(const GraphDataset& data, const TrainConfig& cfg, Variant variant);

/// Grows the stack one layer per stage; see README for the stage protocol.
TrainResult train_lgt(const GraphDataset& data, const TrainConfig& cfg, Variant variant,
                      const StageObserver* observer = nullptr);

TrainResult train(const GraphDataset& data, const TrainConfig& cfg, TrainerKind kind, Variant variant);

/// Eval-mode accuracy on `mask` (dropout off).
double evaluate(const LayerStack& stack, const GraphContext& ctx, std::span<const int> labels,
                std::span<const std::uint32_t> mask);
double evaluate(const LayerStack& stack, const GraphDataset& data, std::span<const std::uint32_t> mask,
                bool row_normalize_features = true);

/// Trainable parameter count of a stack in its current modes.
std::size_t trainable_parameter_count(const LayerStack& stack);

}  // namespace lgt
