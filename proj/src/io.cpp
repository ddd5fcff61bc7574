#include "lgt/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "lgt/error.hpp"

namespace lgt {
namespace {

constexpr std::array<char, 8> kMagic{'L', 'G', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& p) : out_(p, std::ios::binary), path_(p) {
        if (!out_) throw DataError("cannot write " + p.string());
    }
    void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        raw(reinterpret_cast<const char*>(b), 4);
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void matrix(const Matrix& m) {
        for (float v : m.values()) f32(v);
    }
    void close() {
        out_.close();
        if (!out_) throw DataError("write failed for " + path_.string());
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& p) : in_(p, std::ios::binary), path_(p) {
        if (!in_) throw DataError("cannot open checkpoint " + p.string());
    }
    void raw(char* data, std::size_t n) {
        in_.read(data, static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) throw DataError(path_.string() + ": truncated checkpoint");
    }
    std::uint32_t u32() {
        unsigned char b[4];
        raw(reinterpret_cast<char*>(b), 4);
        return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    Matrix matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (auto& v : m.values()) v = f32();
        return m;
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const LayerStack& stack, const std::filesystem::path& path) {
    stack.validate();
    const bool sgc = stack.architecture == Architecture::sgc;
    Writer w(path);
    w.raw(kMagic.data(), kMagic.size());
    w.u32(kVersion);
    w.u32(sgc ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(stack.depth()));
    w.u32(static_cast<std::uint32_t>(sgc ? 0 : stack.input.out_dim()));
    w.u32(static_cast<std::uint32_t>(sgc ? stack.head.rows() : stack.input.in_dim()));
    w.u32(static_cast<std::uint32_t>(stack.head.cols()));
    w.u32(stack.pairnorm ? 1 : 0);
    w.f32(static_cast<float>(stack.pairnorm_scale));
    w.f32(static_cast<float>(stack.dropout_p));
    for (std::size_t k = 0; k < stack.layer_count(); ++k) {
        const auto& l = stack.layer(k);
        w.u32(static_cast<std::uint32_t>(l.mode));
        w.u32(static_cast<std::uint32_t>(l.adapter ? l.adapter->rank : 0));
        w.f32(static_cast<float>(l.adapter ? l.adapter->alpha : 0.0));
    }
    for (std::size_t k = 0; k < stack.layer_count(); ++k) {
        const auto& l = stack.layer(k);
        w.matrix(l.weight);
        if (l.adapter) {
            w.matrix(l.adapter->a);
            w.matrix(l.adapter->b);
        }
    }
    w.matrix(stack.head);
    w.close();
}

LayerStack load_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    std::array<char, 8> magic{};
    r.raw(magic.data(), magic.size());
    if (magic != kMagic) throw DataError(path.string() + ": not a model checkpoint");
    if (const auto v = r.u32(); v != kVersion)
        throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(v));
    const auto arch = r.u32();
    if (arch > 1) throw DataError(path.string() + ": unknown architecture tag " + std::to_string(arch));
    const std::size_t depth = r.u32(), d = r.u32(), f = r.u32(), c = r.u32();
    constexpr std::size_t kLimit = 1u << 20;
    if (depth > kLimit || d > kLimit || f > kLimit || c > kLimit) throw DataError(path.string() + ": implausible dimensions");

    LayerStack stack;
    stack.architecture = arch == 1 ? Architecture::sgc : Architecture::gcn;
    stack.pairnorm = r.u32() != 0;
    stack.pairnorm_scale = r.f32();
    stack.dropout_p = r.f32();
    if (stack.architecture == Architecture::sgc) {
        stack.sgc_hops = depth;
    } else {
        if (depth < 1) throw DataError(path.string() + ": depth must be >= 1");
        stack.hidden.resize(depth - 1);
        for (std::size_t k = 0; k < depth; ++k) {
            auto& l = stack.layer(k);
            const auto mode = r.u32();
            if (mode > 2) throw DataError(path.string() + ": unknown layer mode " + std::to_string(mode));
            l.mode = static_cast<LayerMode>(mode);
            const std::size_t rank = r.u32();
            const double alpha = r.f32();
            if (l.mode == LayerMode::frozen_with_lora) l.adapter = LoraAdapter{{}, {}, rank, alpha};
        }
        for (std::size_t k = 0; k < depth; ++k) {
            auto& l = stack.layer(k);
            const std::size_t in = k == 0 ? f : d;
            l.weight = r.matrix(in, d);
            if (l.adapter) {
                l.adapter->a = r.matrix(in, l.adapter->rank);
                l.adapter->b = r.matrix(l.adapter->rank, d);
            }
        }
    }
    stack.head = r.matrix(stack.architecture == Architecture::sgc ? f : d, c);
    if (!r.at_end()) throw DataError(path.string() + ": trailing bytes after head");
    try {
        stack.validate();
    } catch (const ShapeError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return stack;
}

nlohmann::json to_json(const CollapseReport& r) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : r.per_layer)
        layers.push_back({{"distance_to_constant", l.distance_to_constant}, {"dirichlet_energy", l.dirichlet_energy}});
    return {{"distance_to_constant", r.distance_to_constant}, {"dirichlet_energy", r.dirichlet_energy}, {"per_layer", layers}};
}

nlohmann::json to_json(const StageReport& r) {
    return {{"stage", r.stage},
            {"epochs_run", r.epochs_run},
            {"best_epoch", r.best_epoch},
            {"best_val_acc", r.best_val_acc},
            {"train_loss", r.train_loss},
            {"wall_clock_seconds", r.wall_clock_seconds},
            {"trainable_params", r.trainable_params},
            {"optimizer_steps", r.optimizer_steps}};
}

nlohmann::json to_json(const TrainReport& r) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : r.stages) stages.push_back(to_json(s));
    return {{"trainer", r.trainer},
            {"variant", r.variant},
            {"depth", r.depth},
            {"seed", r.seed},
            {"stages", stages},
            {"val_acc", r.val_acc},
            {"test_acc", r.test_acc},
            {"collapse", to_json(r.collapse)},
            {"total_wall_clock", r.total_wall_clock},
            {"total_optimizer_steps", r.total_optimizer_steps}};
}

nlohmann::json to_json(const TrainConfig& c) {
    nlohmann::json j = {{"depth", c.depth},
                        {"hidden", c.hidden},
                        {"lr", c.lr},
                        {"weight_decay", c.weight_decay},
                        {"max_epochs", c.max_epochs},
                        {"patience", c.patience},
                        {"lora_rank", c.lora_rank},
                        {"lora_alpha", c.alpha()},
                        {"lora_lr", c.adapter_lr()},
                        {"seed", c.seed},
                        {"loss_reduction", c.loss_reduction == ad::LossReduction::mean ? "mean" : "sum"},
                        {"merge_adapters", c.merge_adapters},
                        {"row_normalize_features", c.row_normalize_features},
                        {"use_lora", c.use_lora},
                        {"identity_init", c.identity_init}};
    j["dropout_p"] = c.dropout_p ? nlohmann::json(*c.dropout_p) : nlohmann::json(nullptr);
    j["pairnorm_s"] = c.pairnorm_s ? nlohmann::json(*c.pairnorm_s) : nlohmann::json(nullptr);
    return j;
}

}  // namespace lgt
