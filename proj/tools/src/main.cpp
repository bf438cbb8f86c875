#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sca/checkpoint.hpp"
#include "sca/run_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --data accepts a CSV path (with --schema) or "synth:<clusters>x<per-cluster>".
sca::Dataset build_data(const std::string& data_spec, const std::string& schema_path,
                        std::uint64_t seed) {
    if (data_spec.rfind("synth:", 0) == 0) {
        const std::string dims = data_spec.substr(6);
        const auto x = dims.find('x');
        if (x == std::string::npos)
            throw sca::ConfigError("--data synth spec must look like synth:3x700");
        const std::size_t clusters = std::stoul(dims.substr(0, x));
        const std::size_t per = std::stoul(dims.substr(x + 1));
        return sca::synth_generate(per, clusters, seed);
    }
    if (schema_path.empty()) throw sca::ConfigError("--schema is required with CSV data");
    return sca::build_dataset(data_spec, sca::Schema::from_json_file(schema_path), seed);
}

sca::Split parse_split(const std::string& s) {
    if (s == "train") return sca::Split::Train;
    if (s == "val") return sca::Split::Val;
    if (s == "test") return sca::Split::Test;
    throw sca::ConfigError("--split must be train, val or test");
}

struct RunContext {
    sca::Checkpoint checkpoint;
    sca::TrainConfig config;
    sca::Dataset data;
};

RunContext load_run(const std::string& run_dir, const std::string& data_spec,
                    const std::string& schema_path) {
    const fs::path dir(run_dir);
    std::ifstream in(dir / "manifest.json");
    if (!in) throw sca::DataError("run directory has no manifest.json: " + run_dir);
    json manifest;
    in >> manifest;

    RunContext ctx;
    {
        const fs::path tmp = dir / "config.reload.json";
        std::ofstream out(tmp);
        out << manifest.at("config").dump();
        out.close();
        ctx.config = sca::load_train_config(tmp.string());
        fs::remove(tmp);
    }
    ctx.checkpoint = sca::load_checkpoint((dir / "checkpoint.json").string());
    ctx.data = build_data(data_spec, schema_path, ctx.config.seed);
    const std::uint64_t fp = sca::dataset_fingerprint(ctx.data);
    if (manifest.contains("dataset_fingerprint") &&
        manifest.at("dataset_fingerprint").get<std::uint64_t>() != fp)
        throw sca::DataError("dataset does not match the one this run was trained on");
    return ctx;
}

int cmd_train(const std::string& config_path, const std::string& data_spec,
              const std::string& schema_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::optional<double> gamma0,
              std::optional<std::size_t> k_override) {
    sca::TrainConfig config = sca::load_train_config(config_path);
    if (const char* env = std::getenv("SCA_SEED")) config.seed = std::stoull(env);
    if (seed) config.seed = *seed;
    if (k_override) config.truncation = *k_override;
    if (gamma0) {
        config.gamma0 = *gamma0;
        config.gamma0_grid = {*gamma0};
    }
    config.validate();

    const sca::Dataset data = build_data(data_spec, schema_path, config.seed);

    sca::GridSearchResult result = sca::grid_search(config, data);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    config.gamma0 = result.best_gamma0;
    sca::save_checkpoint((dir / "checkpoint.json").string(), result.best.model,
                         result.best.mixture);
    sca::write_train_record_csv((dir / "train_record.csv").string(), result.best.record);
    sca::write_manifest((dir / "manifest.json").string(), config, sca::dataset_fingerprint(data),
                        "checkpoint.json", "train_record.csv", result.best.best_val_loss,
                        result.best_gamma0);

    std::cout << "run written to " << out_dir << "\n";
    std::cout << "best gamma0: " << result.best_gamma0 << "\n";
    for (const auto& [g, v] : result.candidates)
        std::cout << "  gamma0=" << g << " val_loss=" << v << "\n";
    return 0;
}

int cmd_evaluate(const std::string& run_dir, const std::string& data_spec,
                 const std::string& schema_path, const std::string& split_name) {
    RunContext ctx = load_run(run_dir, data_spec, schema_path);
    const sca::Batch batch = ctx.data.subset(parse_split(split_name));
    const sca::MetricsReport report = sca::compute_metrics(
        ctx.checkpoint.model, ctx.checkpoint.mixture, batch, ctx.config.seed ^ 0xe7a1);
    const std::string js = sca::metrics_to_json(report);
    std::ofstream out(fs::path(run_dir) / ("metrics_" + split_name + ".json"));
    out << js << "\n";
    std::cout << js << "\n";
    return 0;
}

int cmd_cluster(const std::string& run_dir, const std::string& data_spec,
                const std::string& schema_path, const std::string& split_name,
                const std::string& out_csv) {
    RunContext ctx = load_run(run_dir, data_spec, schema_path);
    const sca::Split split = parse_split(split_name);
    const sca::Batch batch = ctx.data.subset(split);
    const std::vector<std::size_t> ids = ctx.data.indices(split);

    sca::Rng rng(ctx.config.seed);
    const sca::Tensor2 z =
        sca::encode(ctx.checkpoint.model.encoder, batch.x, sca::Mode::Eval, rng);
    const auto q = sca::responsibilities_q(ctx.checkpoint.mixture, z);
    std::vector<std::size_t> clusters(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i)
        clusters[i] = sca::assign(ctx.checkpoint.mixture, z.row(i));

    sca::write_assignments_csv(out_csv, ids, clusters, q.resp);

    std::map<std::size_t, sca::SurvivalGroup> groups;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        groups[clusters[i]].times.push_back(batch.t[i]);
        groups[clusters[i]].events.push_back(batch.l[i]);
    }
    const fs::path base = fs::path(out_csv).parent_path();
    const std::string stem = fs::path(out_csv).stem().string();
    for (const auto& [c, g] : groups)
        sca::write_curve_csv((base / (stem + "_km_cluster" + std::to_string(c) + ".csv")).string(),
                             sca::kaplan_meier(g.times, g.events));

    std::cout << "effective K: " << groups.size() << "\n";
    return 0;
}

int cmd_calibration(const std::string& run_dir, const std::string& data_spec,
                    const std::string& schema_path, const std::string& split_name,
                    const std::string& out_csv) {
    RunContext ctx = load_run(run_dir, data_spec, schema_path);
    const sca::Batch batch = ctx.data.subset(parse_split(split_name));

    sca::Rng rng(ctx.config.seed ^ 0xca1);
    const sca::Tensor2 z =
        sca::encode(ctx.checkpoint.model.encoder, batch.x, sca::Mode::Eval, rng);
    const sca::EventSampleSet samples =
        sca::sample_times(ctx.checkpoint.model.generator, z, 200, sca::Mode::Eval, rng);

    const sca::SurvivalCurve km = sca::kaplan_meier(batch.t, batch.l);
    const double total = static_cast<double>(samples.samples.data.size());
    std::vector<double> model_curve, lower, upper, emp;
    for (std::size_t i = 0; i < km.times.size(); ++i) {
        double surv = 0.0;
        for (double v : samples.samples.data) surv += v > km.times[i] ? 1.0 : 0.0;
        model_curve.push_back(surv / total);
        emp.push_back(km.survival[i]);
        const double half = 1.96 * std::sqrt(km.variance[i]);
        lower.push_back(std::max(0.0, km.survival[i] - half));
        upper.push_back(std::min(1.0, km.survival[i] + half));
    }

    const std::vector<double> dec = sca::decile_times(batch.t, batch.l);
    std::vector<double> mod_dec, emp_dec;
    for (double tau : dec) {
        double surv = 0.0;
        for (double v : samples.samples.data) surv += v > tau ? 1.0 : 0.0;
        mod_dec.push_back(surv / total);
        emp_dec.push_back(km.at(tau));
    }
    const auto slope = sca::calibration_slope(mod_dec, emp_dec);

    sca::write_calibration_csv(out_csv, km.times, emp, model_curve, lower, upper,
                               slope.value_or(std::nan("")));
    std::cout << "calibration slope: " << (slope ? std::to_string(*slope) : "undefined") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Survival cluster analysis: train, evaluate, cluster, calibrate"};
    app.require_subcommand(1);

    std::string config_path, data_spec, schema_path, out_path, run_dir, split_name = "test";
    std::optional<std::uint64_t> seed;
    std::optional<double> gamma0;
    std::optional<std::size_t> k_override;

    auto* train = app.add_subcommand("train", "Fit a model and write a run directory");
    train->add_option("--config", config_path, "Training config JSON")->required();
    train->add_option("--data", data_spec, "CSV path or synth:<clusters>x<per-cluster>")->required();
    train->add_option("--schema", schema_path, "Schema JSON for CSV data");
    train->add_option("--out", out_path, "Output run directory")->required();
    train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--gamma0", gamma0, "Fix gamma0 instead of grid searching");
    train->add_option("--k", k_override, "Override the truncation level");

    auto add_eval_opts = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--run", run_dir, "Run directory from 'train'")->required();
        cmd->add_option("--data", data_spec, "Same data spec used for training")->required();
        cmd->add_option("--schema", schema_path, "Schema JSON for CSV data");
        cmd->add_option("--split", split_name, "train, val or test");
        if (with_out) cmd->add_option("--out", out_path, "Output CSV path")->required();
    };
    auto* evaluate = app.add_subcommand("evaluate", "Metrics report for one split");
    add_eval_opts(evaluate, false);
    auto* cluster = app.add_subcommand("cluster", "Cluster assignments and per-cluster KM curves");
    add_eval_opts(cluster, true);
    auto* calibration = app.add_subcommand("calibration", "Paired model/empirical survival curves");
    add_eval_opts(calibration, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (const char* env = std::getenv("SCA_OUT"); env && out_path.empty()) out_path = env;
        if (train->parsed())
            return cmd_train(config_path, data_spec, schema_path, out_path, seed, gamma0, k_override);
        if (evaluate->parsed()) return cmd_evaluate(run_dir, data_spec, schema_path, split_name);
        if (cluster->parsed())
            return cmd_cluster(run_dir, data_spec, schema_path, split_name, out_path);
        if (calibration->parsed())
            return cmd_calibration(run_dir, data_spec, schema_path, split_name, out_path);
    } catch (const sca::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const sca::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const sca::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
