#include "sca/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sca/special.hpp"

namespace sca {

SurvivalModel make_model(const ModelConfig& config, Rng& rng) {
    if (config.covariate_dim == 0) throw std::invalid_argument("make_model: covariate_dim unset");
    SurvivalModel m;
    m.config = config;
    m.encoder.layers.push_back(
        make_hidden_layer(config.covariate_dim, config.hidden_dim, config.dropout, rng));
    m.encoder.layers.push_back(make_output_layer(config.hidden_dim, config.latent_dim, rng));
    m.generator.layers.push_back(
        make_hidden_layer(config.latent_dim, config.hidden_dim, config.dropout, rng));
    m.generator.layers.push_back(
        make_output_layer(config.hidden_dim + config.noise_dim, 1, rng));
    m.generator.noise_dim = config.noise_dim;
    m.generator.noise_kind = config.noise_kind;
    return m;
}

Tensor2 encode(Encoder& encoder, const Tensor2& x_batch, Mode mode, Rng& rng,
               ForwardCache* cache) {
    return mlp_forward(encoder.layers, x_batch, mode, rng, cache);
}

namespace {

double draw_noise(NoiseKind kind, Rng& rng) {
    return kind == NoiseKind::Uniform ? rng.uniform() : rng.normal();
}

}  // namespace

std::vector<double> generate_once(Generator& generator, const Tensor2& z_batch, Mode mode,
                                  Rng& rng, GeneratorCache* cache) {
    const std::size_t m = z_batch.rows;
    if (cache) cache->forward.layers.resize(2);

    Tensor2 hidden = layer_forward(generator.layers[0], z_batch, mode, rng,
                                   cache ? &cache->forward.layers[0] : nullptr);

    Tensor2 with_noise(m, hidden.cols + generator.noise_dim);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < hidden.cols; ++j) with_noise(i, j) = hidden(i, j);
        for (std::size_t j = 0; j < generator.noise_dim; ++j)
            with_noise(i, hidden.cols + j) = draw_noise(generator.noise_kind, rng);
    }

    Tensor2 raw = layer_forward(generator.layers[1], with_noise, mode, rng,
                                cache ? &cache->forward.layers[1] : nullptr);

    std::vector<double> times(m);
    for (std::size_t i = 0; i < m; ++i) {
        times[i] = softplus(raw(i, 0));
        if (!std::isfinite(times[i]))
            throw std::runtime_error("generate_once: non-finite event time");
    }
    if (cache) {
        cache->hidden_with_noise = std::move(with_noise);
        cache->pre_softplus.resize(m);
        for (std::size_t i = 0; i < m; ++i) cache->pre_softplus[i] = raw(i, 0);
    }
    return times;
}

Tensor2 generator_backward(const Generator& generator, const GeneratorCache& cache,
                           std::span<const double> dt, std::vector<LayerGrads>& grads) {
    const std::size_t m = dt.size();
    Tensor2 draw(m, 1);
    for (std::size_t i = 0; i < m; ++i)
        draw(i, 0) = dt[i] * sigmoid(cache.pre_softplus[i]);  // softplus' = sigmoid

    Tensor2 d_with_noise =
        layer_backward(generator.layers[1], cache.forward.layers[1], draw, grads[1]);

    const std::size_t hidden_cols = generator.layers[0].out_dim();
    Tensor2 d_hidden(m, hidden_cols);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < hidden_cols; ++j) d_hidden(i, j) = d_with_noise(i, j);

    return layer_backward(generator.layers[0], cache.forward.layers[0], d_hidden, grads[0]);
}

EventSampleSet sample_times(Generator& generator, const Tensor2& z_batch, std::size_t s_draws,
                            Mode mode, Rng& rng) {
    if (s_draws < 1) throw std::invalid_argument("sample_times: S must be >= 1");
    EventSampleSet set;
    set.samples = Tensor2(z_batch.rows, s_draws);
    for (std::size_t s = 0; s < s_draws; ++s) {
        const std::vector<double> t = generate_once(generator, z_batch, mode, rng);
        for (std::size_t i = 0; i < z_batch.rows; ++i) set.samples(i, s) = t[i];
    }
    return set;
}

std::vector<double> predict_median(const EventSampleSet& set) {
    const std::size_t s = set.draws();
    if (s < 1) throw std::invalid_argument("predict_median: empty sample set");
    std::vector<double> out(set.samples.rows);
    std::vector<double> buf(s);
    for (std::size_t i = 0; i < set.samples.rows; ++i) {
        auto row = set.samples.row(i);
        std::copy(row.begin(), row.end(), buf.begin());
        const std::size_t mid = (s - 1) / 2;  // lower median for even S
        std::nth_element(buf.begin(), buf.begin() + mid, buf.end());
        out[i] = buf[mid];
    }
    return out;
}

}  // namespace sca
