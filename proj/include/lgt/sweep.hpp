#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lgt/dataset.hpp"
#include "lgt/trainer.hpp"

namespace lgt {

struct RunSpec {
    TrainConfig config;
    TrainerKind trainer = TrainerKind::lgt;
    Variant variant = Variant::gcn;
    std::size_t repeats = 1;
    /// Use the dataset's own splits for every repeat instead of redrawing.
    bool fixed_splits = false;
    /// Redrawn split sizes; unset values copy the dataset's current splits
    /// (training nodes per class = |train| / C).
    std::optional<std::size_t> train_per_class;
    std::optional<std::size_t> val_size;
    std::optional<std::size_t> test_size;

    void validate() const;
};

struct RepeatSummary {
    std::vector<TrainReport> reports;
    /// Trained models, filled by run_repeats only.
    std::vector<LayerStack> stacks;
    double mean_test_acc = 0.0;
    /// Population standard deviation over repeats.
    double std_test_acc = 0.0;
    double mean_val_acc = 0.0;
    double mean_wall_clock = 0.0;
};

/// Seed of repeat i is config.seed + i; it drives both the split and training.
GraphDataset dataset_for_repeat(const GraphDataset& data, const RunSpec& spec, std::size_t repeat);

/// Runs the repeats on up to `workers` threads; results do not depend on it.
RepeatSummary run_repeats(const GraphDataset& data, const RunSpec& spec, std::size_t workers = 1);

RepeatSummary summarize(std::vector<TrainReport> reports);

enum class SweepAxis { depth, rank, ablation };

const char* to_string(SweepAxis a);
std::optional<SweepAxis> parse_axis(std::string_view s);

struct SweepSpec {
    SweepAxis axis = SweepAxis::depth;
    RunSpec base;
    /// Depths for the depth axis, ranks for the rank axis; ignored for ablation.
    std::vector<std::size_t> values;
    /// Depths crossed with ranks on the rank axis; empty means base depth.
    std::vector<std::size_t> depths;
    std::size_t workers = 1;
};

struct SweepCell {
    std::string method;
    TrainerKind trainer = TrainerKind::lgt;
    Variant variant = Variant::gcn;
    std::size_t depth = 0;
    std::size_t rank = 0;
    RepeatSummary summary;
};

/// Ablation methods: gcn (joint training), gcn+lt (glorot layers, no
/// adapters), gcn+lt+lora (glorot layers, adapters), gcn+lgt (identity
/// layers, adapters).
std::vector<SweepCell> run_sweep(const GraphDataset& data, const SweepSpec& spec);

/// Wall-clock is the last column so determinism checks can drop it.
std::string sweep_csv(const std::vector<SweepCell>& cells);
std::string sweep_table(const std::vector<SweepCell>& cells);

}  // namespace lgt
