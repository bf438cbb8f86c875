#include "sca/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace sca {

namespace {

using nlohmann::json;

constexpr int kVersion = 1;
constexpr const char* kMagic = "sca-checkpoint";

json tensor_to_json(const Tensor2& t) {
    return json{{"rows", t.rows}, {"cols", t.cols}, {"data", t.data}};
}

Tensor2 tensor_from_json(const json& j) {
    Tensor2 t(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    t.data = j.at("data").get<std::vector<double>>();
    if (t.data.size() != t.rows * t.cols)
        throw std::runtime_error("checkpoint: tensor size mismatch");
    return t;
}

json layer_to_json(const MlpLayer& l) {
    json j{{"weight", tensor_to_json(l.weight)},
           {"bias", l.bias},
           {"has_bn", l.has_bn},
           {"has_relu", l.has_relu},
           {"dropout_rate", l.dropout_rate}};
    if (l.has_bn) {
        j["bn_gamma"] = l.bn_gamma;
        j["bn_beta"] = l.bn_beta;
        j["bn_running_mean"] = l.bn_running_mean;
        j["bn_running_var"] = l.bn_running_var;
    }
    return j;
}

MlpLayer layer_from_json(const json& j) {
    MlpLayer l;
    l.weight = tensor_from_json(j.at("weight"));
    l.bias = j.at("bias").get<std::vector<double>>();
    l.has_bn = j.at("has_bn").get<bool>();
    l.has_relu = j.at("has_relu").get<bool>();
    l.dropout_rate = j.at("dropout_rate").get<double>();
    if (l.has_bn) {
        l.bn_gamma = j.at("bn_gamma").get<std::vector<double>>();
        l.bn_beta = j.at("bn_beta").get<std::vector<double>>();
        l.bn_running_mean = j.at("bn_running_mean").get<std::vector<double>>();
        l.bn_running_var = j.at("bn_running_var").get<std::vector<double>>();
    }
    return l;
}

json layers_to_json(const std::vector<MlpLayer>& layers) {
    json arr = json::array();
    for (const auto& l : layers) arr.push_back(layer_to_json(l));
    return arr;
}

std::vector<MlpLayer> layers_from_json(const json& arr) {
    std::vector<MlpLayer> out;
    for (const auto& j : arr) out.push_back(layer_from_json(j));
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const SurvivalModel& model,
                     const MixtureState& mixture) {
    json j;
    j["format"] = kMagic;
    j["version"] = kVersion;
    j["config"] = {{"covariate_dim", model.config.covariate_dim},
                   {"hidden_dim", model.config.hidden_dim},
                   {"latent_dim", model.config.latent_dim},
                   {"noise_dim", model.config.noise_dim},
                   {"noise_kind", model.config.noise_kind == NoiseKind::Uniform ? "uniform" : "gaussian"},
                   {"dropout", model.config.dropout}};
    j["encoder"] = layers_to_json(model.encoder.layers);
    j["generator"] = layers_to_json(model.generator.layers);
    j["mixture"] = {{"truncation", mixture.truncation},
                    {"dim", mixture.dim},
                    {"centroids", tensor_to_json(mixture.centroids)},
                    {"proportions", mixture.proportions},
                    {"concentration", mixture.concentration},
                    {"dof", mixture.dof},
                    {"step_size", mixture.step_size}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(0) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    json j;
    in >> j;
    if (j.value("format", "") != kMagic)
        throw std::runtime_error("not a checkpoint file: " + path);
    if (j.at("version").get<int>() != kVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);

    Checkpoint cp;
    const json& cfg = j.at("config");
    cp.model.config.covariate_dim = cfg.at("covariate_dim").get<std::size_t>();
    cp.model.config.hidden_dim = cfg.at("hidden_dim").get<std::size_t>();
    cp.model.config.latent_dim = cfg.at("latent_dim").get<std::size_t>();
    cp.model.config.noise_dim = cfg.at("noise_dim").get<std::size_t>();
    cp.model.config.noise_kind =
        cfg.at("noise_kind").get<std::string>() == "gaussian" ? NoiseKind::Gaussian : NoiseKind::Uniform;
    cp.model.config.dropout = cfg.at("dropout").get<double>();
    cp.model.encoder.layers = layers_from_json(j.at("encoder"));
    cp.model.generator.layers = layers_from_json(j.at("generator"));
    cp.model.generator.noise_dim = cp.model.config.noise_dim;
    cp.model.generator.noise_kind = cp.model.config.noise_kind;

    const json& mx = j.at("mixture");
    cp.mixture.truncation = mx.at("truncation").get<std::size_t>();
    cp.mixture.dim = mx.at("dim").get<std::size_t>();
    cp.mixture.centroids = tensor_from_json(mx.at("centroids"));
    cp.mixture.proportions = mx.at("proportions").get<std::vector<double>>();
    cp.mixture.concentration = mx.at("concentration").get<double>();
    cp.mixture.dof = mx.at("dof").get<double>();
    cp.mixture.step_size = mx.at("step_size").get<double>();
    cp.mixture.validate();
    return cp;
}

}  // namespace sca
