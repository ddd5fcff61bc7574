#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lgt/bundle.hpp"
#include "lgt/error.hpp"
#include "lgt/gradcheck_suite.hpp"
#include "lgt/graph.hpp"
#include "lgt/io.hpp"
#include "lgt/metrics.hpp"
#include "lgt/sbm.hpp"
#include "lgt/sweep.hpp"
#include "lgt/trainer.hpp"

namespace py = pybind11;
using namespace lgt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const MatrixD& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data(), m.data() + m.size(), out.mutable_data());
    return out;
}

MatrixD from_numpy(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
    MatrixD m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data());
    return m;
}

Variant variant_arg(const std::string& s) {
    const auto v = parse_variant(s);
    if (!v) throw ShapeError("unknown variant '" + s + "'");
    return *v;
}

TrainerKind trainer_arg(const std::string& s) {
    const auto k = parse_trainer(s);
    if (!k) throw ShapeError("unknown trainer '" + s + "'");
    return *k;
}

}  // namespace

PYBIND11_MODULE(_lgt, m) {
    m.doc() = "Layer-wise gradual training of deep graph convolutional networks";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_IOError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<GraphDataset>(m, "Dataset")
        .def_readwrite("name", &GraphDataset::name)
        .def_readonly("num_classes", &GraphDataset::num_classes)
        .def_property_readonly("num_nodes", &GraphDataset::num_nodes)
        .def_property_readonly("num_features", &GraphDataset::num_features)
        .def_property_readonly("num_edges", &GraphDataset::num_edges)
        .def_property_readonly("features", [](const GraphDataset& d) { return to_numpy(d.features); })
        .def_readonly("labels", &GraphDataset::labels)
        .def_property_readonly("edges", [](const GraphDataset& d) { return edge_list(d.adjacency); })
        .def_property_readonly("splits",
                               [](const GraphDataset& d) {
                                   py::dict s;
                                   s["train"] = d.splits.train;
                                   s["val"] = d.splits.val;
                                   s["test"] = d.splits.test;
                                   return s;
                               })
        .def("validate", &GraphDataset::validate)
        .def("__repr__", [](const GraphDataset& d) {
            return "<Dataset " + d.name + " n=" + std::to_string(d.num_nodes()) + " f=" + std::to_string(d.num_features()) +
                   " C=" + std::to_string(d.num_classes) + ">";
        });

    m.def(
        "generate_sbm",
        [](std::size_t classes, std::size_t nodes_per_class, double p_in, double p_out, std::size_t feature_dim, double signal,
           std::uint64_t seed, std::size_t train_per_class, std::size_t val_size, std::size_t test_size) {
            SbmParams p;
            p.classes = classes;
            p.nodes_per_class = nodes_per_class;
            p.p_in = p_in;
            p.p_out = p_out;
            p.feature_dim = feature_dim;
            p.signal = signal;
            p.seed = seed;
            p.train_per_class = train_per_class;
            p.val_size = val_size;
            p.test_size = test_size;
            return generate_sbm(p);
        },
        py::arg("classes") = 4, py::arg("nodes_per_class") = 100, py::arg("p_in") = 0.1, py::arg("p_out") = 0.01,
        py::arg("feature_dim") = 32, py::arg("signal") = 2.0, py::arg("seed") = 0, py::arg("train_per_class") = 20,
        py::arg("val_size") = 0, py::arg("test_size") = 0);

    m.def("load_bundle", &load_bundle, py::arg("path"));
    m.def("save_bundle", &save_bundle, py::arg("dataset"), py::arg("path"));

    m.def(
        "normalized_laplacian",
        [](const std::vector<Edge>& edges, std::size_t n) {
            return to_numpy(normalized_laplacian(build_adjacency(edges, n)).to_dense());
        },
        py::arg("edges"), py::arg("n"), "Dense D^-1/2 (A + I) D^-1/2 of an undirected edge list.");

    m.def("distance_to_constant", [](const Array& h) { return distance_to_constant(from_numpy(h)); }, py::arg("h"));
    m.def(
        "dirichlet_energy",
        [](const Array& h, const GraphDataset& d) { return dirichlet_energy(from_numpy(h), d.adjacency); }, py::arg("h"),
        py::arg("dataset"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("depth", &TrainConfig::depth)
        .def_readwrite("hidden", &TrainConfig::hidden)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("dropout_p", &TrainConfig::dropout_p)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("lora_rank", &TrainConfig::lora_rank)
        .def_readwrite("lora_alpha", &TrainConfig::lora_alpha)
        .def_readwrite("lora_lr", &TrainConfig::lora_lr)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("merge_adapters", &TrainConfig::merge_adapters)
        .def_readwrite("pairnorm_s", &TrainConfig::pairnorm_s)
        .def_readwrite("row_normalize_features", &TrainConfig::row_normalize_features)
        .def_readwrite("use_lora", &TrainConfig::use_lora)
        .def_readwrite("identity_init", &TrainConfig::identity_init)
        .def_property(
            "loss_reduction", [](const TrainConfig& c) { return std::string(c.loss_reduction == ad::LossReduction::mean ? "mean" : "sum"); },
            [](TrainConfig& c, const std::string& s) {
                if (s == "mean")
                    c.loss_reduction = ad::LossReduction::mean;
                else if (s == "sum")
                    c.loss_reduction = ad::LossReduction::sum;
                else
                    throw ShapeError("loss_reduction must be 'mean' or 'sum'");
            })
        .def("validate", &TrainConfig::validate)
        .def("copy", [](const TrainConfig& c) { return c; })
        .def("to_json", [](const TrainConfig& c) { return to_json(c).dump(); });

    m.def(
        "train_json",
        [](const GraphDataset& data, const TrainConfig& config, const std::string& trainer, const std::string& variant,
           const std::optional<std::filesystem::path>& checkpoint) {
            const auto kind = trainer_arg(trainer);
            const auto var = variant_arg(variant);
            TrainResult res = [&] {
                py::gil_scoped_release release;
                return train(data, config, kind, var);
            }();
            if (checkpoint) save_checkpoint(res.stack, *checkpoint);
            return to_json(res.report).dump();
        },
        py::arg("dataset"), py::arg("config"), py::arg("trainer") = "lgt", py::arg("variant") = "gcn",
        py::arg("checkpoint") = std::nullopt);

    m.def(
        "evaluate_checkpoint",
        [](const std::filesystem::path& checkpoint, const GraphDataset& data, const std::string& split, bool row_normalize) {
            const auto stack = load_checkpoint(checkpoint);
            const auto& mask = split == "train" ? data.splits.train : split == "val" ? data.splits.val : data.splits.test;
            if (split != "train" && split != "val" && split != "test") throw ShapeError("split must be train, val or test");
            return evaluate(stack, data, mask, row_normalize);
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("split") = "test", py::arg("row_normalize") = true);

    m.def(
        "gradcheck",
        [](std::size_t seeds, double eps, double tolerance) {
            GradCheckOptions opt;
            opt.seeds = seeds;
            opt.eps = eps;
            opt.tolerance = tolerance;
            const auto res = run_gradcheck_suite(opt);
            py::dict out;
            out["passed"] = res.passed;
            py::dict cases;
            for (const auto& c : res.cases) cases[py::str(c.name)] = c.max_rel_error;
            out["max_rel_error"] = cases;
            return out;
        },
        py::arg("seeds") = 100, py::arg("eps") = 1e-6, py::arg("tolerance") = 1e-6);
}
