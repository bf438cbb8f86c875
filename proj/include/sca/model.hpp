#pragma once

#include <vector>

#include "sca/mlp.hpp"

namespace sca {

enum class NoiseKind { Uniform, Gaussian };

struct ModelConfig {
    std::size_t covariate_dim = 0;   // p
    std::size_t hidden_dim = 50;
    std::size_t latent_dim = 50;     // d_z
    std::size_t noise_dim = 50;
    NoiseKind noise_kind = NoiseKind::Uniform;
    double dropout = 0.2;
};

// Deterministic covariate encoder z = r_psi(x): hidden block then a plain
// affine output into the latent space.
struct Encoder {
    std::vector<MlpLayer> layers;
};

// Stochastic time generator t = g_theta(z, eps). Noise enters only at the
// last layer: it is concatenated to the hidden activation before the affine
// output, and the output passes through softplus so every time is positive.
struct Generator {
    std::vector<MlpLayer> layers;  // [hidden block, output (hidden+noise -> 1)]
    std::size_t noise_dim = 50;
    NoiseKind noise_kind = NoiseKind::Uniform;
};

struct SurvivalModel {
    ModelConfig config;
    Encoder encoder;
    Generator generator;
};

SurvivalModel make_model(const ModelConfig& config, Rng& rng);

// S sampled times per individual, rows = individuals.
struct EventSampleSet {
    Tensor2 samples;  // N x S
    std::size_t draws() const { return samples.cols; }
};

Tensor2 encode(Encoder& encoder, const Tensor2& x_batch, Mode mode, Rng& rng,
               ForwardCache* cache = nullptr);

EventSampleSet sample_times(Generator& generator, const Tensor2& z_batch, std::size_t s_draws,
                            Mode mode, Rng& rng);

// Lower-middle element for even S.
std::vector<double> predict_median(const EventSampleSet& set);

// Training-path forward: one sampled time per individual, keeping everything
// the backward pass needs.
struct GeneratorCache {
    ForwardCache forward;
    Tensor2 hidden_with_noise;       // input to the output layer
    std::vector<double> pre_softplus;
};

std::vector<double> generate_once(Generator& generator, const Tensor2& z_batch, Mode mode,
                                  Rng& rng, GeneratorCache* cache = nullptr);

// Backward from dL/dt through softplus and the generator stack; returns
// dL/dz and accumulates parameter grads.
Tensor2 generator_backward(const Generator& generator, const GeneratorCache& cache,
                           std::span<const double> dt, std::vector<LayerGrads>& grads);

}  // namespace sca
