#include "lgt/sweep.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "lgt/error.hpp"

namespace lgt {
namespace {

/// Runs jobs [0, count) on `workers` threads; rethrows the first failure.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < count;) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct Job {
    std::size_t cell;
    std::size_t repeat;
};

}  // namespace

void RunSpec::validate() const {
    config.validate();
    if (repeats < 1) throw ShapeError("repeats must be >= 1");
    if (trainer == TrainerKind::lgt && variant == Variant::sgc) throw ShapeError("the lgt trainer has no sgc variant");
}

GraphDataset dataset_for_repeat(const GraphDataset& data, const RunSpec& spec, std::size_t repeat) {
    GraphDataset d = data;
    if (spec.fixed_splits) return d;
    const std::size_t per_class = spec.train_per_class.value_or(data.splits.train.size() / std::max<std::size_t>(1, data.num_classes));
    d.splits = split_per_class(data.labels, data.num_classes, per_class, spec.val_size.value_or(data.splits.val.size()),
                               spec.test_size.value_or(data.splits.test.size()), spec.config.seed + repeat);
    return d;
}

RepeatSummary summarize(std::vector<TrainReport> reports) {
    RepeatSummary s;
    s.reports = std::move(reports);
    const double n = static_cast<double>(s.reports.size());
    if (s.reports.empty()) return s;
    for (const auto& r : s.reports) {
        s.mean_test_acc += r.test_acc / n;
        s.mean_val_acc += r.val_acc / n;
        s.mean_wall_clock += r.total_wall_clock / n;
    }
    double var = 0.0;
    for (const auto& r : s.reports) var += (r.test_acc - s.mean_test_acc) * (r.test_acc - s.mean_test_acc) / n;
    s.std_test_acc = std::sqrt(var);
    return s;
}

RepeatSummary run_repeats(const GraphDataset& data, const RunSpec& spec, std::size_t workers) {
    spec.validate();
    std::vector<TrainReport> reports(spec.repeats);
    std::vector<LayerStack> stacks(spec.repeats);
    parallel_for(spec.repeats, workers, [&](std::size_t i) {
        const auto d = dataset_for_repeat(data, spec, i);
        TrainConfig cfg = spec.config;
        cfg.seed = spec.config.seed + i;
        auto res = train(d, cfg, spec.trainer, spec.variant);
        reports[i] = std::move(res.report);
        stacks[i] = std::move(res.stack);
    });
    auto summary = summarize(std::move(reports));
    summary.stacks = std::move(stacks);
    return summary;
}

const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::depth: return "depth";
        case SweepAxis::rank: return "rank";
        case SweepAxis::ablation: return "ablation";
    }
    return "?";
}

std::optional<SweepAxis> parse_axis(std::string_view s) {
    if (s == "depth") return SweepAxis::depth;
    if (s == "rank") return SweepAxis::rank;
    if (s == "ablation") return SweepAxis::ablation;
    return std::nullopt;
}

std::vector<SweepCell> run_sweep(const GraphDataset& data, const SweepSpec& spec) {
    std::vector<SweepCell> cells;
    std::vector<RunSpec> runs;
    auto add = [&](std::string method, RunSpec run) {
        SweepCell c;
        c.method = std::move(method);
        c.trainer = run.trainer;
        c.variant = run.variant;
        c.depth = run.config.depth;
        c.rank = run.trainer == TrainerKind::lgt && run.config.use_lora ? run.config.lora_rank : 0;
        cells.push_back(std::move(c));
        runs.push_back(std::move(run));
    };
    const auto method_name = [](const RunSpec& r) {
        return std::string(r.trainer == TrainerKind::lgt ? "lgt/" : "standard/") + to_string(r.variant);
    };

    switch (spec.axis) {
        case SweepAxis::depth:
            if (spec.values.empty()) throw ShapeError("depth sweep needs at least one depth");
            for (auto k : spec.values) {
                RunSpec r = spec.base;
                r.config.depth = k;
                add(method_name(r), r);
            }
            break;
        case SweepAxis::rank: {
            if (spec.values.empty()) throw ShapeError("rank sweep needs at least one rank");
            const auto depths = spec.depths.empty() ? std::vector<std::size_t>{spec.base.config.depth} : spec.depths;
            for (auto k : depths)
                for (auto r : spec.values) {
                    RunSpec run = spec.base;
                    run.trainer = TrainerKind::lgt;
                    run.config.depth = k;
                    run.config.lora_rank = r;
                    add(method_name(run), run);
                }
            break;
        }
        case SweepAxis::ablation: {
            RunSpec joint = spec.base;
            joint.trainer = TrainerKind::standard;
            joint.variant = Variant::gcn;
            add("gcn", joint);
            RunSpec staged = spec.base;
            staged.trainer = TrainerKind::lgt;
            staged.variant = Variant::gcn;
            staged.config.use_lora = false;
            staged.config.identity_init = false;
            add("gcn+lt", staged);
            staged.config.use_lora = true;
            add("gcn+lt+lora", staged);
            staged.config.identity_init = true;
            add("gcn+lgt", staged);
            break;
        }
    }
    for (const auto& r : runs) r.validate();

    std::vector<Job> jobs;
    for (std::size_t c = 0; c < runs.size(); ++c)
        for (std::size_t i = 0; i < runs[c].repeats; ++i) jobs.push_back({c, i});
    std::vector<std::vector<TrainReport>> reports(runs.size());
    for (std::size_t c = 0; c < runs.size(); ++c) reports[c].resize(runs[c].repeats);
    parallel_for(jobs.size(), spec.workers, [&](std::size_t j) {
        const auto [c, i] = jobs[j];
        const auto& run = runs[c];
        const auto d = dataset_for_repeat(data, run, i);
        TrainConfig cfg = run.config;
        cfg.seed = run.config.seed + i;
        reports[c][i] = train(d, cfg, run.trainer, run.variant).report;
    });
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c].summary = summarize(std::move(reports[c]));
    return cells;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::string out = "method,trainer,variant,depth,rank,repeats,mean_test_acc,std_test_acc,mean_val_acc,mean_wall_clock\n";
    for (const auto& c : cells) {
        out += c.method + "," + to_string(c.trainer) + "," + to_string(c.variant) + "," + std::to_string(c.depth) + "," +
               std::to_string(c.rank) + "," + std::to_string(c.summary.reports.size()) + "," +
               fixed(c.summary.mean_test_acc, 6) + "," + fixed(c.summary.std_test_acc, 6) + "," +
               fixed(c.summary.mean_val_acc, 6) + "," + fixed(c.summary.mean_wall_clock, 3) + "\n";
    }
    return out;
}

std::string sweep_table(const std::vector<SweepCell>& cells) {
    std::vector<std::vector<std::string>> rows{{"method", "depth", "rank", "test acc (%)", "val acc (%)", "wall (s)"}};
    for (const auto& c : cells)
        rows.push_back({c.method, std::to_string(c.depth), c.rank ? std::to_string(c.rank) : "-",
                        fixed(100 * c.summary.mean_test_acc, 2) + " ± " + fixed(100 * c.summary.std_test_acc, 2),
                        fixed(100 * c.summary.mean_val_acc, 2), fixed(c.summary.mean_wall_clock, 2)});
    std::vector<std::size_t> width(rows.front().size(), 0);
    auto display_width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char ch : s) w += (ch & 0xC0) != 0x80;
        return w;
    };
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], display_width(r[i]));
    std::string out;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t i = 0; i < rows[k].size(); ++i) {
            const auto pad = std::string(width[i] - display_width(rows[k][i]), ' ');
            out += i == 0 ? rows[k][i] + pad : "  " + pad + rows[k][i];
        }
        out += "\n";
        if (k == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            out += std::string(total - 2, '-') + "\n";
        }
    }
    return out;
}

}  // namespace lgt
