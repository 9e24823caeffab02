// Python bindings for the core operations: planning, dataset parsing,
// model building/training/evaluation, TargetDrop primitives and the
// gradient-check suite.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "adafsnet/checkpoint.hpp"
#include "adafsnet/dataset.hpp"
#include "adafsnet/error.hpp"
#include "adafsnet/gradcheck.hpp"
#include "adafsnet/model.hpp"
#include "adafsnet/planner.hpp"
#include "adafsnet/targetdrop.hpp"
#include "adafsnet/train.hpp"

namespace py = pybind11;
using namespace adafsnet;

namespace {

// Owns the model together with the RNG stream that built it, so seeded
// training stays reproducible from Python exactly like the CLI.
struct PyModel {
    KernelPlan plan;
    ModelConfig config;
    int input_dim;
    Rng rng;
    AdaFSNet model;

    PyModel(const KernelPlan& plan_, const ModelConfig& cfg, int input_dim_, std::uint64_t seed)
        : plan(plan_), config(cfg), input_dim(input_dim_), rng(seed),
          model(plan_, cfg, input_dim_, rng) {}

    explicit PyModel(AdaFSNet&& loaded)
        : plan(loaded.plan()), config(loaded.config()), input_dim(loaded.input_dim()), rng(0),
          model(std::move(loaded)) {}

    py::dict fit(const TimeSeriesDataset& train_set, const TrainConfig& cfg) {
        const TrainResult result = train(model, train_set, cfg, rng);
        py::list history;
        for (const EpochStats& e : result.history) {
            history.append(py::make_tuple(e.epoch, e.loss, e.train_accuracy));
        }
        py::dict out;
        out["history"] = history;
        out["respecialized"] = result.respecialized;
        out["preserved_kernels"] = result.preserved_kernels;
        out["wall_seconds"] = result.wall_seconds;
        return out;
    }

    double score(const TimeSeriesDataset& test_set, int eval_batch) {
        return evaluate(model, test_set, eval_batch);
    }

    py::array_t<double> predict(py::array_t<double, py::array::c_style | py::array::forcecast> x,
                                bool training) {
        if (x.ndim() != 3) throw ShapeError("predict: input must be [B,D,W]");
        const int B = static_cast<int>(x.shape(0));
        const int D = static_cast<int>(x.shape(1));
        const int W = static_cast<int>(x.shape(2));
        std::vector<real_t> values(static_cast<std::size_t>(B) * D * W);
        const double* src = x.data();
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<real_t>(src[i]);
        NoGradGuard no_grad;
        Tensor logits = model.forward(Tensor::from_values({B, D, W}, std::move(values)),
                                      training ? Mode::kTrain : Mode::kEval);
        py::array_t<double> out({B, config.num_classes});
        double* dst = out.mutable_data();
        for (std::size_t i = 0; i < logits.values().size(); ++i) {
            dst[i] = static_cast<double>(logits.values()[i]);
        }
        return out;
    }
};

}  // namespace

PYBIND11_MODULE(_adafsnet, m) {
    m.doc() = "Prime-kernel full-scope 1D CNN for time series classification";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeErrorPy", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    // --- planner ---
    py::class_<KernelPlan>(m, "KernelPlan")
        .def_readonly("p_k", &KernelPlan::p_k)
        .def_readonly("p1", &KernelPlan::p1)
        .def_readonly("p2", &KernelPlan::p2)
        .def_readonly("p3", &KernelPlan::p3)
        .def_readonly("paths", &KernelPlan::paths)
        .def_readonly("coverage", &KernelPlan::coverage)
        .def_readonly("target_rf", &KernelPlan::target_rf)
        .def("__repr__", [](const KernelPlan& p) {
            return "KernelPlan(p_k=" + std::to_string(p.p_k) +
                   ", target_rf=" + std::to_string(p.target_rf) +
                   ", paths=" + std::to_string(p.paths.size()) + ")";
        });

    m.def("sieve_primes", &sieve_primes, py::arg("n"));
    m.def("goldbach_pair", &goldbach_pair, py::arg("e"));
    m.def("receptive_field", &receptive_field, py::arg("kernels"));
    m.def("select_pk", &select_pk, py::arg("series_length"), py::arg("rf_cap") = 48,
          py::arg("p3_literal") = false);
    m.def("make_plan", &make_plan, py::arg("p_k"), py::arg("target_rf"),
          py::arg("p3_literal") = false);
    m.def(
        "verify_coverage",
        [](const KernelPlan& plan) {
            const CoverageReport r = verify_coverage(plan);
            return py::make_tuple(r.ok, r.missing);
        },
        py::arg("plan"));
    m.def("coverage_certificate", &coverage_certificate, py::arg("plan"));

    // --- datasets ---
    py::class_<TimeSeriesDataset>(m, "TimeSeriesDataset")
        .def_readonly("name", &TimeSeriesDataset::name)
        .def_readonly("split", &TimeSeriesDataset::split)
        .def_readonly("width", &TimeSeriesDataset::width)
        .def_readonly("dims", &TimeSeriesDataset::dims)
        .def_readonly("class_names", &TimeSeriesDataset::class_names)
        .def("__len__", [](const TimeSeriesDataset& ds) { return ds.samples.size(); })
        .def("label",
             [](const TimeSeriesDataset& ds, std::size_t i) { return ds.samples.at(i).label; })
        .def("values",
             [](const TimeSeriesDataset& ds, std::size_t i) { return ds.samples.at(i).values; })
        .def("num_classes", &TimeSeriesDataset::num_classes);

    auto load_opts = [](bool normalize, bool interpolate_missing) {
        LoadOptions opts;
        opts.normalize = normalize;
        opts.interpolate_missing = interpolate_missing;
        return opts;
    };
    m.def(
        "parse_ucr_tsv",
        [load_opts](const std::string& text, bool normalize, bool interpolate_missing) {
            return parse_ucr_tsv(text, load_opts(normalize, interpolate_missing));
        },
        py::arg("text"), py::arg("normalize") = true, py::arg("interpolate_missing") = false);
    m.def(
        "parse_ts",
        [load_opts](const std::string& text, bool normalize, bool interpolate_missing) {
            return parse_ts(text, load_opts(normalize, interpolate_missing));
        },
        py::arg("text"), py::arg("normalize") = true, py::arg("interpolate_missing") = false);
    m.def(
        "load_pair",
        [load_opts](const std::filesystem::path& dir, const std::string& name, bool normalize,
                    bool interpolate_missing) {
            return load_pair(dir, name, load_opts(normalize, interpolate_missing));
        },
        py::arg("directory"), py::arg("name"), py::arg("normalize") = true,
        py::arg("interpolate_missing") = false);
    m.def("to_tsv", &to_tsv, py::arg("dataset"));
    m.def("to_ts", &to_ts, py::arg("dataset"));
    m.def(
        "znormalize",
        [](std::vector<double> series) {
            const bool constant = znormalize(series);
            return py::make_tuple(series, constant);
        },
        py::arg("series"));

    // --- TargetDrop primitives ---
    m.def(
        "select_targets",
        [](const std::vector<double>& attention, double gamma) {
            std::vector<real_t> a(attention.begin(), attention.end());
            const TargetVector tv = select_targets(a, static_cast<real_t>(gamma));
            std::vector<int> selected(tv.selected.begin(), tv.selected.end());
            return py::make_tuple(selected, tv.k, static_cast<double>(tv.threshold));
        },
        py::arg("attention"), py::arg("gamma"));
    m.def(
        "drop_region",
        [](const std::vector<double>& channel, int k) {
            std::vector<real_t> c(channel.begin(), channel.end());
            const DropRegion r = drop_region(c.data(), static_cast<int>(c.size()), k);
            return py::make_tuple(r.peak, r.w1, r.w2);
        },
        py::arg("channel"), py::arg("k"));

    // --- configs ---
    py::class_<TargetDropConfig>(m, "TargetDropConfig")
        .def(py::init([](double gamma, int reduction_ratio, int region_length) {
                 TargetDropConfig cfg;
                 cfg.gamma = static_cast<real_t>(gamma);
                 cfg.reduction_ratio = reduction_ratio;
                 cfg.region_length = region_length;
                 return cfg;
             }),
             py::arg("gamma") = 0.15, py::arg("reduction_ratio") = 16, py::arg("region_length") = 0)
        .def_property_readonly("gamma",
                               [](const TargetDropConfig& c) { return static_cast<double>(c.gamma); })
        .def_readonly("reduction_ratio", &TargetDropConfig::reduction_ratio)
        .def_readonly("region_length", &TargetDropConfig::region_length);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](int filters_per_path, int growth_rate, int dense_block_count,
                         bool enable_targetdrop, int preserved_kernel_count, int num_classes,
                         const TargetDropConfig& targetdrop) {
                 ModelConfig cfg;
                 cfg.filters_per_path = filters_per_path;
                 cfg.growth_rate = growth_rate;
                 cfg.dense_block_count = dense_block_count;
                 cfg.enable_targetdrop = enable_targetdrop;
                 cfg.preserved_kernel_count = preserved_kernel_count;
                 cfg.num_classes = num_classes;
                 cfg.targetdrop = targetdrop;
                 return cfg;
             }),
             py::arg("filters_per_path") = 4, py::arg("growth_rate") = 16,
             py::arg("dense_block_count") = 2, py::arg("enable_targetdrop") = true,
             py::arg("preserved_kernel_count") = 4, py::arg("num_classes") = 2,
             py::arg("targetdrop") = TargetDropConfig{})
        .def_readonly("filters_per_path", &ModelConfig::filters_per_path)
        .def_readonly("growth_rate", &ModelConfig::growth_rate)
        .def_readonly("dense_block_count", &ModelConfig::dense_block_count)
        .def_readonly("enable_targetdrop", &ModelConfig::enable_targetdrop)
        .def_readonly("num_classes", &ModelConfig::num_classes);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](double lr, int batch_size, int max_epochs, std::uint64_t seed,
                         int warmup_epochs, int early_stop_patience, int log_every) {
                 TrainConfig cfg;
                 cfg.lr = lr;
                 cfg.batch_size = batch_size;
                 cfg.max_epochs = max_epochs;
                 cfg.seed = seed;
                 cfg.warmup_epochs = warmup_epochs;
                 cfg.early_stop_patience = early_stop_patience;
                 cfg.log_every = log_every;
                 return cfg;
             }),
             py::arg("lr") = 0.001, py::arg("batch_size") = 16, py::arg("max_epochs") = 1500,
             py::arg("seed") = 0, py::arg("warmup_epochs") = 20,
             py::arg("early_stop_patience") = 0, py::arg("log_every") = 0)
        .def_readonly("lr", &TrainConfig::lr)
        .def_readonly("batch_size", &TrainConfig::batch_size)
        .def_readonly("max_epochs", &TrainConfig::max_epochs);

    // --- model ---
    py::class_<PyModel>(m, "AdaFSNet")
        .def(py::init<const KernelPlan&, const ModelConfig&, int, std::uint64_t>(),
             py::arg("plan"), py::arg("config"), py::arg("input_dim") = 1, py::arg("seed") = 0)
        .def("fit", &PyModel::fit, py::arg("train_set"), py::arg("config") = TrainConfig{})
        .def("evaluate", &PyModel::score, py::arg("test_set"), py::arg("eval_batch") = 64)
        .def("predict", &PyModel::predict, py::arg("x"), py::arg("training") = false)
        .def("parameter_count", [](PyModel& pm) { return pm.model.parameter_count(); })
        .def("os_channels", [](PyModel& pm) { return pm.model.os_channels(); })
        .def("dense_kernels", [](PyModel& pm) { return pm.model.dense_kernels(); })
        .def("respecialized", [](PyModel& pm) { return pm.model.respecialized(); })
        .def("save", [](PyModel& pm, const std::filesystem::path& path) {
            save_checkpoint(pm.model, path);
        })
        .def_static("load", [](const std::filesystem::path& path) {
            return PyModel(load_checkpoint(path));
        })
        .def_readonly("plan", &PyModel::plan)
        .def_readonly("input_dim", &PyModel::input_dim);

    // --- metrics / gradcheck ---
    m.def("pce", &pce, py::arg("error"), py::arg("classes"));
    m.def("mpce", &mpce, py::arg("pces"));
    m.def(
        "run_gradient_suite",
        [](int cases_per_op, std::uint64_t seed) {
            py::list out;
            for (const GradCheckReport& r : run_gradient_suite(cases_per_op, seed)) {
                py::dict d;
                d["op"] = r.op;
                d["cases"] = r.cases;
                d["max_error"] = static_cast<double>(r.max_error);
                d["seconds"] = r.seconds;
                out.append(d);
            }
            return out;
        },
        py::arg("cases_per_op") = 20, py::arg("seed") = 0);

    m.attr("__version__") = "0.1.0";
}
