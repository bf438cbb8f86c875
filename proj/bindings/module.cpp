// Python bindings for the survival cluster analysis core.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "sca/checkpoint.hpp"
#include "sca/data.hpp"
#include "sca/dpmix.hpp"
#include "sca/losses.hpp"
#include "sca/metrics.hpp"
#include "sca/model.hpp"
#include "sca/run_io.hpp"
#include "sca/trainer.hpp"

namespace py = pybind11;
using namespace sca;

namespace {

py::array_t<double> tensor_to_numpy(const Tensor2& t) {
    py::array_t<double> out({t.rows, t.cols});
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

Tensor2 numpy_to_tensor(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
    Tensor2 t(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + t.data.size(), t.data.begin());
    return t;
}

std::vector<std::uint8_t> to_events(const std::vector<int>& events) {
    std::vector<std::uint8_t> out;
    out.reserve(events.size());
    for (int e : events) {
        if (e != 0 && e != 1) throw py::value_error("event flags must be 0 or 1");
        out.push_back(static_cast<std::uint8_t>(e));
    }
    return out;
}

std::vector<int> from_events(const std::vector<std::uint8_t>& events) {
    return {events.begin(), events.end()};
}

}  // namespace

PYBIND11_MODULE(sca, m) {
    m.doc() = "Survival cluster analysis: time-to-event prediction with latent "
              "Dirichlet-process clustering";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<NumericError>(m, "NumericError");

    py::enum_<Split>(m, "Split")
        .value("TRAIN", Split::Train)
        .value("VAL", Split::Val)
        .value("TEST", Split::Test);

    py::class_<Batch>(m, "Batch")
        .def_property_readonly("x", [](const Batch& b) { return tensor_to_numpy(b.x); })
        .def_readonly("t", &Batch::t)
        .def_property_readonly("l", [](const Batch& b) { return from_events(b.l); })
        .def("__len__", [](const Batch& b) { return b.t.size(); });

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("x", [](const Dataset& d) { return tensor_to_numpy(d.x); })
        .def_readonly("t", &Dataset::t)
        .def_property_readonly("l", [](const Dataset& d) { return from_events(d.l); })
        .def_readonly("split", &Dataset::split)
        .def_readonly("true_labels", &Dataset::true_labels)
        .def_readonly("dropped_rows", &Dataset::dropped_rows)
        .def("subset", &Dataset::subset, py::arg("split"))
        .def("indices", &Dataset::indices, py::arg("split"))
        .def("__len__", [](const Dataset& d) { return d.t.size(); });

    m.def("synth_generate", &synth_generate, py::arg("n_per_cluster"), py::arg("n_clusters"),
          py::arg("seed"), "Synthetic benchmark: one risk axis, Weibull event times");
    m.def(
        "build_dataset",
        [](const std::string& csv, const std::string& schema_json, std::uint64_t seed) {
            return build_dataset(csv, Schema::from_json_file(schema_json), seed);
        },
        py::arg("csv_path"), py::arg("schema_path"), py::arg("seed"));
    m.def("dataset_fingerprint", &dataset_fingerprint, py::arg("dataset"));

    py::enum_<NoiseKind>(m, "NoiseKind")
        .value("UNIFORM", NoiseKind::Uniform)
        .value("GAUSSIAN", NoiseKind::Gaussian);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("truncation", &TrainConfig::truncation)
        .def_readwrite("gamma0_grid", &TrainConfig::gamma0_grid)
        .def_readwrite("gamma0", &TrainConfig::gamma0)
        .def_readwrite("eta", &TrainConfig::eta)
        .def_readwrite("nu", &TrainConfig::nu)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("pretrain_epochs", &TrainConfig::pretrain_epochs)
        .def_readwrite("lambda2", &TrainConfig::lambda2)
        .def_readwrite("lambda3", &TrainConfig::lambda3)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
        .def_readwrite("latent_dim", &TrainConfig::latent_dim)
        .def_readwrite("noise_dim", &TrainConfig::noise_dim)
        .def_readwrite("noise_kind", &TrainConfig::noise_kind)
        .def_readwrite("dropout", &TrainConfig::dropout)
        .def("validate", &TrainConfig::validate);

    py::class_<SurvivalModel>(m, "SurvivalModel");

    py::class_<MixtureState>(m, "MixtureState")
        .def_property_readonly("centroids",
                               [](const MixtureState& s) { return tensor_to_numpy(s.centroids); })
        .def_readonly("proportions", &MixtureState::proportions)
        .def_readonly("truncation", &MixtureState::truncation)
        .def_readonly("concentration", &MixtureState::concentration);

    py::class_<EpochRecord>(m, "EpochRecord")
        .def_readonly("epoch", &EpochRecord::epoch)
        .def_readonly("joint", &EpochRecord::joint)
        .def_readonly("loss_dp", &EpochRecord::loss_dp)
        .def_readonly("loss_acc", &EpochRecord::loss_acc)
        .def_readonly("loss_cal", &EpochRecord::loss_cal)
        .def_readonly("loss_total", &EpochRecord::loss_total)
        .def_readonly("val_total", &EpochRecord::val_total)
        .def_readonly("effective_k", &EpochRecord::effective_k);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("model", &FitResult::model)
        .def_readonly("mixture", &FitResult::mixture)
        .def_readonly("best_val_loss", &FitResult::best_val_loss)
        .def_property_readonly("epochs",
                               [](const FitResult& r) { return r.record.epochs; });

    m.def("fit", &fit, py::arg("config"), py::arg("dataset"),
          py::call_guard<py::gil_scoped_release>());
    m.def(
        "grid_search",
        [](const TrainConfig& cfg, const Dataset& data) {
            py::gil_scoped_release release;
            GridSearchResult r = grid_search(cfg, data);
            py::gil_scoped_acquire acquire;
            return py::make_tuple(r.best_gamma0, std::move(r.best), r.candidates);
        },
        py::arg("config"), py::arg("dataset"),
        "Returns (best_gamma0, best_fit, [(gamma0, val_loss), ...])");

    m.def(
        "encode",
        [](SurvivalModel& model, const py::array_t<double>& x, std::uint64_t seed) {
            Rng rng(seed);
            return tensor_to_numpy(encode(model.encoder, numpy_to_tensor(x), Mode::Eval, rng));
        },
        py::arg("model"), py::arg("x"), py::arg("seed") = 0,
        "Deterministic latent representation (evaluation mode)");
    m.def(
        "sample_times",
        [](SurvivalModel& model, const py::array_t<double>& x, std::size_t draws,
           std::uint64_t seed) {
            Rng rng(seed);
            const Tensor2 z = encode(model.encoder, numpy_to_tensor(x), Mode::Eval, rng);
            return tensor_to_numpy(sample_times(model.generator, z, draws, Mode::Eval, rng).samples);
        },
        py::arg("model"), py::arg("x"), py::arg("draws") = 200, py::arg("seed") = 0,
        "Sampled event times, one row per individual");
    m.def(
        "predict_median",
        [](SurvivalModel& model, const py::array_t<double>& x, std::size_t draws,
           std::uint64_t seed) {
            Rng rng(seed);
            const Tensor2 z = encode(model.encoder, numpy_to_tensor(x), Mode::Eval, rng);
            return predict_median(sample_times(model.generator, z, draws, Mode::Eval, rng));
        },
        py::arg("model"), py::arg("x"), py::arg("draws") = 200, py::arg("seed") = 0);
    m.def(
        "assign_clusters",
        [](SurvivalModel& model, const MixtureState& mixture, const py::array_t<double>& x,
           std::uint64_t seed) {
            Rng rng(seed);
            const Tensor2 z = encode(model.encoder, numpy_to_tensor(x), Mode::Eval, rng);
            std::vector<std::size_t> out;
            for (std::size_t i = 0; i < z.rows; ++i) out.push_back(assign(mixture, z.row(i)));
            return out;
        },
        py::arg("model"), py::arg("mixture"), py::arg("x"), py::arg("seed") = 0);
    m.def(
        "effective_k",
        [](SurvivalModel& model, const MixtureState& mixture, const py::array_t<double>& x,
           std::uint64_t seed) {
            Rng rng(seed);
            const Tensor2 z = encode(model.encoder, numpy_to_tensor(x), Mode::Eval, rng);
            return effective_k(mixture, z);
        },
        py::arg("model"), py::arg("mixture"), py::arg("x"), py::arg("seed") = 0);

    m.def(
        "compute_metrics",
        [](SurvivalModel& model, const MixtureState& mixture, const Batch& batch,
           std::uint64_t seed) {
            const MetricsReport r = compute_metrics(model, mixture, batch, seed);
            py::dict out;
            out["c_index"] = r.c_index;
            out["rae_uncensored"] = r.rae_uncensored;
            out["rae_censored"] = r.rae_censored;
            out["mean_cov"] = r.mean_cov;
            out["calibration_slope"] = r.calibration_slope;
            out["logrank_score"] = r.logrank_score;
            out["effective_k"] = r.effective_k;
            return out;
        },
        py::arg("model"), py::arg("mixture"), py::arg("batch"), py::arg("seed") = 0);

    m.def(
        "kaplan_meier",
        [](const std::vector<double>& times, const std::vector<int>& events) {
            const SurvivalCurve c = kaplan_meier(times, to_events(events));
            return py::make_tuple(c.times, c.survival, c.variance);
        },
        py::arg("times"), py::arg("events"),
        "Returns (event_times, survival, greenwood_variance)");
    m.def(
        "logrank_pair",
        [](const std::vector<double>& t1, const std::vector<int>& e1,
           const std::vector<double>& t2, const std::vector<int>& e2) {
            return logrank_pair({t1, to_events(e1)}, {t2, to_events(e2)});
        },
        py::arg("times_a"), py::arg("events_a"), py::arg("times_b"), py::arg("events_b"));
    m.def(
        "logrank_score",
        [](const std::vector<std::size_t>& labels, const std::vector<double>& t,
           const std::vector<int>& e) { return logrank_score(labels, t, to_events(e)); },
        py::arg("labels"), py::arg("times"), py::arg("events"));
    m.def(
        "c_index",
        [](const std::vector<double>& pred, const std::vector<double>& t,
           const std::vector<int>& e) { return c_index(pred, t, to_events(e)); },
        py::arg("predicted"), py::arg("times"), py::arg("events"),
        "Larger predicted time must mean longer survival");
    m.def(
        "rae",
        [](const std::vector<double>& pred, const std::vector<double>& t,
           const std::vector<int>& e) {
            const RaePair r = rae(pred, t, to_events(e));
            return py::make_tuple(r.uncensored, r.censored);
        },
        py::arg("predicted"), py::arg("times"), py::arg("events"));
    m.def("calibration_slope", &calibration_slope, py::arg("model_points"),
          py::arg("empirical_points"));
    m.def(
        "decile_times",
        [](const std::vector<double>& t, const std::vector<int>& e) {
            return decile_times(t, to_events(e));
        },
        py::arg("times"), py::arg("events"));

    m.def("stick_weights", &stick_weights, py::arg("k"), py::arg("gamma0"));
    m.def(
        "kl_dirichlet",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return kl_dirichlet(a, b);
        },
        py::arg("xi"), py::arg("gamma"));

    m.def(
        "save_checkpoint",
        [](const std::string& path, const SurvivalModel& model, const MixtureState& mixture) {
            save_checkpoint(path, model, mixture);
        },
        py::arg("path"), py::arg("model"), py::arg("mixture"));
    m.def(
        "load_checkpoint",
        [](const std::string& path) {
            Checkpoint c = load_checkpoint(path);
            return py::make_tuple(std::move(c.model), std::move(c.mixture));
        },
        py::arg("path"), "Returns (model, mixture)");
}
