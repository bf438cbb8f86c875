#pragma once

#include <string>
#include <vector>

#include "sca/rng.hpp"
#include "sca/tensor.hpp"

namespace sca {

enum class Mode { Train, Eval };

// One dense block. Order inside the block: dense -> batch-norm -> ReLU ->
// dropout. Output layers disable batch-norm/ReLU/dropout and are plain affine.
struct MlpLayer {
    Tensor2 weight;  // in x out
    std::vector<double> bias;

    bool has_bn = true;
    bool has_relu = true;
    double dropout_rate = 0.0;

    std::vector<double> bn_gamma, bn_beta;
    std::vector<double> bn_running_mean, bn_running_var;

    std::size_t in_dim() const { return weight.rows; }
    std::size_t out_dim() const { return weight.cols; }
};

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;  // running = 0.9*running + 0.1*batch

// Uniform(-a, a) with a = sqrt(6/(fan_in+fan_out)).
Tensor2 xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

MlpLayer make_hidden_layer(std::size_t in, std::size_t out, double dropout, Rng& rng);
MlpLayer make_output_layer(std::size_t in, std::size_t out, Rng& rng);

// Per-layer values saved by the forward pass for the backward pass.
struct LayerCache {
    Tensor2 input;
    Tensor2 pre_bn;         // x*W + b
    Tensor2 normalized;     // (pre_bn - mean)/sqrt(var+eps), bn layers only
    std::vector<double> batch_mean, batch_var;   // statistics actually used
    std::vector<double> inv_std;
    Tensor2 pre_relu;       // after bn/affine, before ReLU
    Tensor2 dropout_mask;   // inverted scaling already applied (0 or 1/(1-p))
    Tensor2 output;
    Mode mode = Mode::Eval;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
};

struct LayerGrads {
    Tensor2 weight;
    std::vector<double> bias;
    std::vector<double> bn_gamma, bn_beta;
};

Tensor2 mlp_forward(std::vector<MlpLayer>& layers, const Tensor2& x, Mode mode, Rng& rng,
                    ForwardCache* cache = nullptr);

// Returns gradient w.r.t. the input batch; fills per-layer parameter grads.
Tensor2 mlp_backward(const std::vector<MlpLayer>& layers, const ForwardCache& cache,
                     const Tensor2& upstream, std::vector<LayerGrads>& grads);

Tensor2 layer_forward(MlpLayer& layer, const Tensor2& x, Mode mode, Rng& rng,
                      LayerCache* cache = nullptr);
Tensor2 layer_backward(const MlpLayer& layer, const LayerCache& cache, const Tensor2& upstream,
                       LayerGrads& grads);

std::vector<LayerGrads> make_zero_grads(const std::vector<MlpLayer>& layers);

// Adam with bias correction over one flat parameter vector.
struct AdamState {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<double> first_moment, second_moment;
};

// params and grads must alias the same layout between calls; `name` labels
// the parameter group in numeric-failure messages.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const std::string& name = "params");

// Flat views over every trainable array in a layer stack, in a fixed order.
std::vector<std::span<double>> param_views(std::vector<MlpLayer>& layers);
std::vector<std::span<double>> grad_views(std::vector<LayerGrads>& grads);
std::size_t param_count(const std::vector<MlpLayer>& layers);

}  // namespace sca
