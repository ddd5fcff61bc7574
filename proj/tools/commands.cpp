#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lgt/bundle.hpp"
#include "lgt/error.hpp"
#include "lgt/gradcheck_suite.hpp"
#include "lgt/io.hpp"
#include "lgt/metrics.hpp"
#include "lgt/sbm.hpp"
#include "lgt/sweep.hpp"
#include "lgt/trainer.hpp"

namespace lgt::cli {
namespace {

namespace fs = std::filesystem;

/// Accepts a bundle directory or a bare name looked up under
/// $LGT_DATA_DIR and ./data.
fs::path resolve_data(const std::string& arg) {
    if (fs::is_directory(arg)) return arg;
    std::vector<fs::path> roots;
    if (const char* env = std::getenv("LGT_DATA_DIR")) roots.emplace_back(env);
    roots.emplace_back("data");
    for (const auto& r : roots)
        if (fs::is_directory(r / arg)) return r / arg;
    throw DataError("dataset not found: '" + arg + "' is not a bundle directory (also looked under $LGT_DATA_DIR and ./data)");
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
}

struct TrainFlags {
    std::string config_path;
    std::string data;
    std::string trainer = "lgt";
    std::string variant = "gcn";
    std::string reduction = "mean";
    double dropout = 0.0;
    double lora_alpha = 0.0;
    double lora_lr = 0.0;
    double pairnorm_s = 1.0;
    bool no_merge = false;
    bool no_row_normalize = false;
    bool no_lora = false;
    bool glorot_layers = false;
    std::size_t train_per_class = 0;
    std::size_t val_size = 0;
    std::size_t test_size = 0;
    std::size_t workers = 1;
    std::string out_dir;
    RunSpec spec;

    CLI::Option* dropout_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* lora_lr_opt = nullptr;
    CLI::Option* pairnorm_opt = nullptr;
    CLI::Option* tpc_opt = nullptr;
    CLI::Option* val_opt = nullptr;
    CLI::Option* test_opt = nullptr;

    void attach(CLI::App* app, bool with_trainer) {
        auto& c = spec.config;
        app->add_option("--config", config_path, "Key-value config file (TOML/INI); flags override it");
        app->add_option("--data", data, "Bundle directory or dataset name")->required();
        if (with_trainer)
            app->add_option("--trainer", trainer, "standard | lgt")->check(CLI::IsMember({"standard", "lgt"}));
        app->add_option("--variant", variant, "gcn | sgc | gcn+pairnorm")->check(CLI::IsMember({"gcn", "sgc", "gcn+pairnorm", "pairnorm"}));
        app->add_option("--depth", c.depth, "Number of GCN layers K")->check(CLI::PositiveNumber);
        app->add_option("--hidden", c.hidden, "Hidden width d")->check(CLI::PositiveNumber);
        app->add_option("--lr", c.lr, "Learning rate")->check(CLI::PositiveNumber);
        app->add_option("--weight-decay", c.weight_decay, "Decoupled weight decay")->check(CLI::NonNegativeNumber);
        dropout_opt = app->add_option("--dropout", dropout, "Dropout probability (default 0.5 standard, 0 lgt)")->check(CLI::Range(0.0, 0.999999));
        app->add_option("--max-epochs", c.max_epochs, "Epoch budget per stage")->check(CLI::PositiveNumber);
        app->add_option("--patience", c.patience, "Early-stopping patience")->check(CLI::PositiveNumber);
        app->add_option("--lora-rank", c.lora_rank, "Adapter rank r")->check(CLI::PositiveNumber);
        alpha_opt = app->add_option("--lora-alpha", lora_alpha, "Adapter alpha (default r)")->check(CLI::PositiveNumber);
        lora_lr_opt = app->add_option("--lora-lr", lora_lr, "Adapter learning rate (default lr)")->check(CLI::PositiveNumber);
        app->add_option("--seed", c.seed, "Base seed; repeat i uses seed + i");
        app->add_option("--loss-reduction", reduction, "mean | sum")->check(CLI::IsMember({"mean", "sum"}));
        app->add_flag("--no-merge", no_merge, "Keep adapters across stages instead of merging");
        pairnorm_opt = app->add_option("--pairnorm-s", pairnorm_s, "PairNorm scale s")->check(CLI::PositiveNumber);
        app->add_flag("--no-row-normalize", no_row_normalize, "Use raw features");
        app->add_flag("--no-lora", no_lora, "Staged training without adapters");
        app->add_flag("--glorot-new-layers", glorot_layers, "Initialize added layers with glorot instead of identity");
        app->add_option("--repeats", spec.repeats, "Number of seeds")->check(CLI::PositiveNumber);
        app->add_flag("--fixed-splits", spec.fixed_splits, "Use the bundle's splits.json for every repeat");
        tpc_opt = app->add_option("--train-per-class", train_per_class, "Redrawn training nodes per class")->check(CLI::PositiveNumber);
        val_opt = app->add_option("--val-size", val_size, "Redrawn validation size")->check(CLI::PositiveNumber);
        test_opt = app->add_option("--test-size", test_size, "Redrawn test size")->check(CLI::PositiveNumber);
        app->add_option("--workers", workers, "Parallel runs")->check(CLI::PositiveNumber);
        app->add_option("--out", out_dir, "Output directory");
    }

    /// Folds parsed flags into spec; throws ShapeError on invalid combinations.
    void finish() {
        auto& c = spec.config;
        spec.trainer = *parse_trainer(trainer);
        spec.variant = *parse_variant(variant);
        c.loss_reduction = reduction == "sum" ? ad::LossReduction::sum : ad::LossReduction::mean;
        if (dropout_opt->count()) c.dropout_p = dropout;
        if (alpha_opt->count()) c.lora_alpha = lora_alpha;
        if (lora_lr_opt->count()) c.lora_lr = lora_lr;
        if (pairnorm_opt->count()) c.pairnorm_s = pairnorm_s;
        if (tpc_opt->count()) spec.train_per_class = train_per_class;
        if (val_opt->count()) spec.val_size = val_size;
        if (test_opt->count()) spec.test_size = test_size;
        c.merge_adapters = !no_merge;
        c.row_normalize_features = !no_row_normalize;
        c.use_lora = !no_lora;
        c.identity_init = !glorot_layers;
        spec.validate();
    }
};

std::string pct(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * v;
    return s.str();
}

int cmd_train(TrainFlags& f, std::ostream& out) {
    f.finish();
    const auto data = load_bundle(resolve_data(f.data));
    const auto summary = run_repeats(data, f.spec, f.workers);

    nlohmann::json accs = nlohmann::json::array();
    std::string csv = "seed,val_acc,test_acc,distance_to_constant,dirichlet_energy,total_optimizer_steps,total_wall_clock\n";
    for (std::size_t i = 0; i < summary.reports.size(); ++i) {
        const auto& r = summary.reports[i];
        accs.push_back(r.test_acc);
        out << "seed " << r.seed << ": val " << pct(r.val_acc) << "  test " << pct(r.test_acc) << "  ("
            << std::fixed << std::setprecision(2) << r.total_wall_clock << " s)\n";
        std::ostringstream row;
        row << r.seed << ',' << std::setprecision(6) << std::fixed << r.val_acc << ',' << r.test_acc << ','
            << r.collapse.distance_to_constant << ',' << r.collapse.dirichlet_energy << ',' << r.total_optimizer_steps
            << ',' << std::setprecision(3) << r.total_wall_clock << '\n';
        csv += row.str();
        if (!f.out_dir.empty()) {
            const fs::path dir = f.out_dir;
            write_file(dir / ("report_seed" + std::to_string(r.seed) + ".json"), to_json(r).dump(2) + "\n");
            save_checkpoint(summary.stacks[i], dir / ("model_seed" + std::to_string(r.seed) + ".ckpt"));
        }
    }
    out << to_string(f.spec.trainer) << "/" << to_string(f.spec.variant) << " depth " << f.spec.config.depth
        << ": test acc " << pct(summary.mean_test_acc) << " ± " << pct(summary.std_test_acc) << " over "
        << summary.reports.size() << " repeat(s)\n";
    if (!f.out_dir.empty()) {
        const fs::path dir = f.out_dir;
        nlohmann::json s = {{"dataset", data.name},
                            {"trainer", to_string(f.spec.trainer)},
                            {"variant", to_string(f.spec.variant)},
                            {"repeats", f.spec.repeats},
                            {"fixed_splits", f.spec.fixed_splits},
                            {"config", to_json(f.spec.config)},
                            {"test_accs", accs},
                            {"mean_test_acc", summary.mean_test_acc},
                            {"std_test_acc", summary.std_test_acc},
                            {"mean_val_acc", summary.mean_val_acc},
                            {"mean_wall_clock", summary.mean_wall_clock}};
        write_file(dir / "summary.json", s.dump(2) + "\n");
        write_file(dir / "summary.csv", csv);
    }
    return ok;
}

/// Splices "--config FILE" into flags placed right after the subcommand, so
/// flags given on the command line (which come later) take precedence.
/// Keys may be top-level or under a [train] / [sweep] section.
std::vector<std::string> expand_config(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || (args[0] != "train" && args[0] != "sweep")) return args;
    std::string path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);
    std::vector<std::string> spliced;
    for (const auto& item : CLI::ConfigTOML{}.from_config(in)) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty() && item.parents != std::vector<std::string>{args[0]}) continue;
        std::string flag = "--" + item.name;
        std::replace(flag.begin() + 2, flag.end(), '_', '-');
        if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "false")) {
            if (item.inputs[0] == "true") spliced.push_back(flag);
            continue;
        }
        std::string joined;
        for (const auto& v : item.inputs) joined += (joined.empty() ? "" : ",") + v;
        spliced.push_back(flag);
        spliced.push_back(joined);
    }
    args.insert(args.begin() + 1, spliced.begin(), spliced.end());
    return args;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Layer-wise gradual training for deep graph convolutional networks"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Expand all help");

    auto* prepare = app.add_subcommand("prepare", "Write a graph bundle");
    prepare->require_subcommand(1);
    SbmParams sbm;
    std::string sbm_out;
    auto* p_sbm = prepare->add_subcommand("sbm", "Stochastic block model");
    p_sbm->add_option("--classes", sbm.classes)->check(CLI::PositiveNumber);
    p_sbm->add_option("--per-class", sbm.nodes_per_class)->check(CLI::PositiveNumber);
    p_sbm->add_option("--p-in", sbm.p_in)->check(CLI::Range(0.0, 1.0));
    p_sbm->add_option("--p-out", sbm.p_out)->check(CLI::Range(0.0, 1.0));
    p_sbm->add_option("--feature-dim", sbm.feature_dim)->check(CLI::PositiveNumber);
    p_sbm->add_option("--signal", sbm.signal)->check(CLI::NonNegativeNumber);
    p_sbm->add_option("--seed", sbm.seed);
    p_sbm->add_option("--train-per-class", sbm.train_per_class)->check(CLI::PositiveNumber);
    p_sbm->add_option("--val-size", sbm.val_size, "0 = half of the rest, capped at 1000");
    p_sbm->add_option("--test-size", sbm.test_size, "0 = half of the rest, capped at 1000");
    p_sbm->add_option("--out", sbm_out, "Bundle directory")->required();

    std::string linqs_content, linqs_cites, linqs_name = "cora", linqs_out;
    std::uint64_t linqs_seed = 0;
    std::size_t linqs_per_class = 20, linqs_val = 1000, linqs_test = 1000;
    auto* p_linqs = prepare->add_subcommand("linqs", "Convert a LINQS citation dump (.content + .cites)");
    p_linqs->add_option("--content", linqs_content)->required();
    p_linqs->add_option("--cites", linqs_cites)->required();
    p_linqs->add_option("--name", linqs_name);
    p_linqs->add_option("--seed", linqs_seed, "Seed of the stored 20-per-class split");
    p_linqs->add_option("--train-per-class", linqs_per_class);
    p_linqs->add_option("--val-size", linqs_val);
    p_linqs->add_option("--test-size", linqs_test);
    p_linqs->add_option("--out", linqs_out, "Bundle directory")->required();

    TrainFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "Train with early stopping over one or more seeds");
    train_flags.attach(train_cmd, true);

    TrainFlags sweep_flags;
    std::string axis = "depth";
    std::vector<std::size_t> values, sweep_depths;
    auto* sweep_cmd = app.add_subcommand("sweep", "Grid over depth, rank, or ablation variants");
    sweep_flags.attach(sweep_cmd, true);
    sweep_cmd->add_option("--axis", axis, "depth | rank | ablation")->check(CLI::IsMember({"depth", "rank", "ablation"}));
    sweep_cmd->add_option("--values", values, "Depths or ranks, comma separated")->delimiter(',')->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--depths", sweep_depths, "Depths crossed with --values on the rank axis")->delimiter(',')->check(CLI::PositiveNumber);

    GradCheckOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
    gc_cmd->add_option("--seeds", gc.seeds)->check(CLI::PositiveNumber);
    gc_cmd->add_option("--first-seed", gc.first_seed);
    gc_cmd->add_option("--eps", gc.eps)->check(CLI::Range(1e-7, 1e-3));
    gc_cmd->add_option("--tolerance", gc.tolerance)->check(CLI::PositiveNumber);
    gc_cmd->add_flag("--corrupt-backward", gc.corrupt_backward, "Debug: break the backward pass on purpose");

    std::string ev_data, ev_model, ev_split = "test";
    bool ev_raw = false;
    auto* ev_cmd = app.add_subcommand("evaluate", "Accuracy of a checkpoint on a bundle split");
    ev_cmd->add_option("--data", ev_data)->required();
    ev_cmd->add_option("--model", ev_model)->required();
    ev_cmd->add_option("--split", ev_split)->check(CLI::IsMember({"train", "val", "test"}));
    ev_cmd->add_flag("--no-row-normalize", ev_raw);

    std::string ex_data, ex_model, ex_out;
    std::size_t ex_layer = 0;
    bool ex_raw = false;
    auto* ex_cmd = app.add_subcommand("export", "Write post-activation embeddings of one layer as CSV");
    ex_cmd->add_option("--data", ex_data)->required();
    ex_cmd->add_option("--model", ex_model)->required();
    ex_cmd->add_option("--layer", ex_layer, "0 = input features, K = last layer");
    ex_cmd->add_option("--out", ex_out)->required();
    ex_cmd->add_flag("--no-row-normalize", ex_raw);

    try {
        auto args = expand_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    try {
        if (p_sbm->parsed()) {
            if (sbm.p_out > sbm.p_in) throw ShapeError("--p-out must not exceed --p-in");
            const auto d = generate_sbm(sbm);
            save_bundle(d, sbm_out);
            out << "wrote " << sbm_out << ": n=" << d.num_nodes() << " f=" << d.num_features() << " C=" << d.num_classes
                << " edges=" << d.num_edges() << "\n";
        } else if (p_linqs->parsed()) {
            const auto d = convert_linqs(linqs_content, linqs_cites, linqs_name, linqs_seed, linqs_per_class, linqs_val, linqs_test);
            save_bundle(d, linqs_out);
            out << "wrote " << linqs_out << ": n=" << d.num_nodes() << " f=" << d.num_features() << " C=" << d.num_classes
                << " edges=" << d.num_edges() << "\n";
        } else if (train_cmd->parsed()) {
            return cmd_train(train_flags, out);
        } else if (sweep_cmd->parsed()) {
            sweep_flags.finish();
            SweepSpec spec;
            spec.axis = *parse_axis(axis);
            spec.base = sweep_flags.spec;
            spec.values = values;
            spec.depths = sweep_depths;
            spec.workers = sweep_flags.workers;
            const auto data = load_bundle(resolve_data(sweep_flags.data));
            const auto cells = run_sweep(data, spec);
            const auto table = sweep_table(cells);
            out << table;
            if (!sweep_flags.out_dir.empty()) {
                const fs::path dir = sweep_flags.out_dir;
                write_file(dir / "sweep.csv", sweep_csv(cells));
                write_file(dir / "sweep.txt", table);
            }
        } else if (gc_cmd->parsed()) {
            const auto res = run_gradcheck_suite(gc);
            for (const auto& c : res.cases)
                out << std::left << std::setw(26) << c.name << " max rel error " << std::scientific << std::setprecision(3)
                    << c.max_rel_error << " over " << std::dec << c.entries_checked << " entries  "
                    << (c.passed ? "ok" : "FAIL (seed " + std::to_string(c.worst_seed) + ")") << "\n";
            out << (res.passed ? "gradcheck passed\n" : "gradcheck FAILED\n");
            return res.passed ? ok : numerical_abort;
        } else if (ev_cmd->parsed()) {
            const auto data = load_bundle(resolve_data(ev_data));
            const auto stack = load_checkpoint(ev_model);
            const auto& mask = ev_split == "train" ? data.splits.train : ev_split == "val" ? data.splits.val : data.splits.test;
            const double acc = evaluate(stack, data, mask, !ev_raw);
            out << ev_split << " accuracy " << std::fixed << std::setprecision(4) << acc << "\n";
        } else if (ex_cmd->parsed()) {
            const auto data = load_bundle(resolve_data(ex_data));
            const auto stack = load_checkpoint(ex_model);
            auto ctx = make_context<float>(data, !ex_raw);
            if (stack.architecture == Architecture::sgc) ctx.prepare_sgc(stack.sgc_hops);
            export_embeddings(ctx, stack, data.labels, ex_layer, ex_out);
            out << "wrote " << ex_out << "\n";
        }
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << "\n";
        return usage;
    } catch (const NumericalError& e) {
        err << "numerical abort: " << e.what() << "\n";
        return numerical_abort;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return data_error;
    } catch (const std::exception& e) {
        err << "data error: " << e.what() << "\n";
        return data_error;
    }
    return ok;
}

}  // namespace lgt::cli
