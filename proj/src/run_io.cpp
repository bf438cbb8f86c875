#include "sca/run_io.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace sca {

namespace {

using nlohmann::json;

template <typename T>
void read_field(const json& j, const char* name, T& out) {
    if (!j.contains(name)) return;
    try {
        out = j.at(name).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + name + "' has the wrong type");
    }
}

}  // namespace

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file not readable: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }

    static const std::set<std::string> known = {
        "truncation", "gamma0_grid", "gamma0",      "eta",        "nu",
        "batch_size", "lr",          "max_epochs",  "patience",   "pretrain_epochs",
        "lambda2",    "lambda3",     "seed",        "hidden_dim", "latent_dim",
        "noise_dim",  "noise_kind",  "dropout"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");

    TrainConfig c;
    read_field(j, "truncation", c.truncation);
    read_field(j, "gamma0_grid", c.gamma0_grid);
    read_field(j, "gamma0", c.gamma0);
    read_field(j, "eta", c.eta);
    read_field(j, "nu", c.nu);
    read_field(j, "batch_size", c.batch_size);
    read_field(j, "lr", c.lr);
    read_field(j, "max_epochs", c.max_epochs);
    read_field(j, "patience", c.patience);
    read_field(j, "pretrain_epochs", c.pretrain_epochs);
    read_field(j, "lambda2", c.lambda2);
    read_field(j, "lambda3", c.lambda3);
    read_field(j, "seed", c.seed);
    read_field(j, "hidden_dim", c.hidden_dim);
    read_field(j, "latent_dim", c.latent_dim);
    read_field(j, "noise_dim", c.noise_dim);
    if (j.contains("noise_kind")) {
        const std::string k = j.at("noise_kind").get<std::string>();
        if (k == "uniform")
            c.noise_kind = NoiseKind::Uniform;
        else if (k == "gaussian")
            c.noise_kind = NoiseKind::Gaussian;
        else
            throw ConfigError("config field 'noise_kind' must be 'uniform' or 'gaussian'");
    }
    read_field(j, "dropout", c.dropout);
    c.validate();
    return c;
}

std::string train_config_to_json(const TrainConfig& c) {
    json j{{"truncation", c.truncation},
           {"gamma0_grid", c.gamma0_grid},
           {"gamma0", c.gamma0},
           {"eta", c.eta},
           {"nu", c.nu},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"pretrain_epochs", c.pretrain_epochs},
           {"lambda2", c.lambda2},
           {"lambda3", c.lambda3},
           {"seed", c.seed},
           {"hidden_dim", c.hidden_dim},
           {"latent_dim", c.latent_dim},
           {"noise_dim", c.noise_dim},
           {"noise_kind", c.noise_kind == NoiseKind::Uniform ? "uniform" : "gaussian"},
           {"dropout", c.dropout}};
    return j.dump(2);
}

MetricsReport compute_metrics(SurvivalModel& model, const MixtureState& mixture,
                              const Batch& batch, std::uint64_t noise_seed,
                              std::size_t s_draws) {
    Rng rng(noise_seed);
    const Tensor2 z = encode(model.encoder, batch.x, Mode::Eval, rng);
    const EventSampleSet samples = sample_times(model.generator, z, s_draws, Mode::Eval, rng);
    const std::vector<double> predicted = predict_median(samples);

    MetricsReport report;
    report.c_index = c_index(predicted, batch.t, batch.l);
    const RaePair r = rae(predicted, batch.t, batch.l);
    report.rae_uncensored = r.uncensored;
    report.rae_censored = r.censored;
    report.mean_cov = s_draws >= 2 ? mean_cov(samples) : 0.0;

    std::vector<std::size_t> clusters(batch.x.rows);
    for (std::size_t i = 0; i < batch.x.rows; ++i) clusters[i] = assign(mixture, z.row(i));
    report.logrank_score = logrank_score(clusters, batch.t, batch.l);
    report.effective_k = effective_k(mixture, z);

    // Predicted vs empirical survival at the deciles of observed event times;
    // the model curve pools all sampled times.
    const SurvivalCurve km = kaplan_meier(batch.t, batch.l);
    const std::vector<double> dec = decile_times(batch.t, batch.l);
    if (dec.size() >= 2) {
        std::vector<double> emp, mod;
        const double total = static_cast<double>(samples.samples.data.size());
        for (double tau : dec) {
            emp.push_back(km.at(tau));
            double surv = 0.0;
            for (double v : samples.samples.data) surv += v > tau ? 1.0 : 0.0;
            mod.push_back(surv / total);
        }
        report.calibration_slope = calibration_slope(mod, emp);
    }
    return report;
}

std::string metrics_to_json(const MetricsReport& report) {
    json j;
    auto put = [&j](const char* name, const std::optional<double>& v) {
        if (v)
            j[name] = *v;
        else
            j[name] = nullptr;
    };
    put("c_index", report.c_index);
    put("rae_uncensored", report.rae_uncensored);
    put("rae_censored", report.rae_censored);
    j["mean_cov"] = report.mean_cov;
    put("calibration_slope", report.calibration_slope);
    if (report.logrank_score)
        j["logrank_score"] = *report.logrank_score;
    else
        j["logrank_score"] = "no clustering structure";
    j["effective_k"] = report.effective_k;
    return j.dump(2);
}

void write_train_record_csv(const std::string& path, const TrainRecord& record) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,phase,loss_dp,loss_acc,loss_cal,loss_total,val_total,effective_k,wall_seconds\n";
    for (const auto& e : record.epochs)
        out << e.epoch << ',' << (e.joint ? "joint" : "pretrain") << ',' << e.loss_dp << ','
            << e.loss_acc << ',' << e.loss_cal << ',' << e.loss_total << ',' << e.val_total << ','
            << e.effective_k << ',' << e.wall_seconds << '\n';
}

void write_manifest(const std::string& path, const TrainConfig& config,
                    std::uint64_t dataset_fingerprint, const std::string& checkpoint_path,
                    const std::string& record_path, double best_val_loss, double best_gamma0) {
    json j;
    j["config"] = json::parse(train_config_to_json(config));
    j["seed"] = config.seed;
    j["dataset_fingerprint"] = dataset_fingerprint;
    j["checkpoint"] = checkpoint_path;
    j["train_record"] = record_path;
    j["best_val_loss"] = best_val_loss;
    j["best_gamma0"] = best_gamma0;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_assignments_csv(const std::string& path, const std::vector<std::size_t>& ids,
                           const std::vector<std::size_t>& clusters, const Tensor2& q_rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "id,cluster";
    for (std::size_t k = 0; k < q_rows.cols; ++k) out << ",q" << k;
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i] << ',' << clusters[i];
        for (std::size_t k = 0; k < q_rows.cols; ++k) out << ',' << q_rows(i, k);
        out << '\n';
    }
}

void write_curve_csv(const std::string& path, const SurvivalCurve& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "time,survival,lower,upper\n";
    out.precision(17);
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        const double half = 1.96 * std::sqrt(curve.variance[i]);
        out << curve.times[i] << ',' << curve.survival[i] << ','
            << std::max(0.0, curve.survival[i] - half) << ','
            << std::min(1.0, curve.survival[i] + half) << '\n';
    }
}

void write_calibration_csv(const std::string& path, const std::vector<double>& times,
                           const std::vector<double>& empirical,
                           const std::vector<double>& model_curve,
                           const std::vector<double>& lower, const std::vector<double>& upper,
                           double slope) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    out << "# calibration_slope=" << slope << '\n';
    out << "time,empirical_survival,model_survival,greenwood_lower,greenwood_upper\n";
    for (std::size_t i = 0; i < times.size(); ++i)
        out << times[i] << ',' << empirical[i] << ',' << model_curve[i] << ',' << lower[i] << ','
            << upper[i] << '\n';
}

}  // namespace sca
