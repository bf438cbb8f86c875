#include "sca/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace sca {

Tensor2 xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    if (fan_in < 1 || fan_out < 1) throw std::invalid_argument("xavier_init: fan dims must be >= 1");
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor2 w(fan_in, fan_out);
    for (double& v : w.data) v = rng.uniform(-a, a);
    return w;
}

MlpLayer make_hidden_layer(std::size_t in, std::size_t out, double dropout, Rng& rng) {
    MlpLayer l;
    l.weight = xavier_init(in, out, rng);
    l.bias.assign(out, 0.0);
    l.has_bn = true;
    l.has_relu = true;
    l.dropout_rate = dropout;
    l.bn_gamma.assign(out, 1.0);
    l.bn_beta.assign(out, 0.0);
    l.bn_running_mean.assign(out, 0.0);
    l.bn_running_var.assign(out, 1.0);
    return l;
}

MlpLayer make_output_layer(std::size_t in, std::size_t out, Rng& rng) {
    MlpLayer l;
    l.weight = xavier_init(in, out, rng);
    l.bias.assign(out, 0.0);
    l.has_bn = false;
    l.has_relu = false;
    l.dropout_rate = 0.0;
    return l;
}

Tensor2 layer_forward(MlpLayer& layer, const Tensor2& x, Mode mode, Rng& rng, LayerCache* c) {
    check_shape(x.cols == layer.in_dim(), "mlp layer input");
    const std::size_t m = x.rows;
    const std::size_t d = layer.out_dim();

    Tensor2 pre_bn = matmul(x, layer.weight);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) pre_bn(i, j) += layer.bias[j];

    Tensor2 h = pre_bn;
    Tensor2 normalized;
    std::vector<double> mean, var, inv_std;
    if (layer.has_bn) {
        mean.assign(d, 0.0);
        var.assign(d, 0.0);
        inv_std.assign(d, 0.0);
        if (mode == Mode::Train) {
            for (std::size_t j = 0; j < d; ++j) {
                double mu = 0.0;
                for (std::size_t i = 0; i < m; ++i) mu += pre_bn(i, j);
                mu /= static_cast<double>(m);
                double v = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double e = pre_bn(i, j) - mu;
                    v += e * e;
                }
                v /= static_cast<double>(m);
                mean[j] = mu;
                var[j] = v;
                layer.bn_running_mean[j] = kBnMomentum * layer.bn_running_mean[j] + (1.0 - kBnMomentum) * mu;
                layer.bn_running_var[j] = kBnMomentum * layer.bn_running_var[j] + (1.0 - kBnMomentum) * v;
            }
        } else {
            mean = layer.bn_running_mean;
            var = layer.bn_running_var;
        }
        normalized = Tensor2(m, d);
        for (std::size_t j = 0; j < d; ++j) {
            inv_std[j] = 1.0 / std::sqrt(var[j] + kBnEps);
            for (std::size_t i = 0; i < m; ++i) {
                const double nrm = (pre_bn(i, j) - mean[j]) * inv_std[j];
                normalized(i, j) = nrm;
                h(i, j) = layer.bn_gamma[j] * nrm + layer.bn_beta[j];
            }
        }
    }

    Tensor2 pre_relu = h;
    if (layer.has_relu)
        for (double& v : h.data) v = v > 0.0 ? v : 0.0;

    Tensor2 mask;
    if (layer.dropout_rate > 0.0 && mode == Mode::Train) {
        const double keep = 1.0 - layer.dropout_rate;
        mask = Tensor2(m, d);
        for (std::size_t i = 0; i < h.data.size(); ++i) {
            mask.data[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
            h.data[i] *= mask.data[i];
        }
    }

    if (c) {
        c->input = x;
        c->pre_bn = std::move(pre_bn);
        c->normalized = std::move(normalized);
        c->batch_mean = std::move(mean);
        c->batch_var = std::move(var);
        c->inv_std = std::move(inv_std);
        c->pre_relu = std::move(pre_relu);
        c->dropout_mask = std::move(mask);
        c->output = h;
        c->mode = mode;
    }
    return h;
}

Tensor2 mlp_forward(std::vector<MlpLayer>& layers, const Tensor2& x, Mode mode, Rng& rng,
                    ForwardCache* cache) {
    Tensor2 h = x;
    if (cache) cache->layers.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i)
        h = layer_forward(layers[i], h, mode, rng, cache ? &cache->layers[i] : nullptr);
    return h;
}

std::vector<LayerGrads> make_zero_grads(const std::vector<MlpLayer>& layers) {
    std::vector<LayerGrads> g(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        g[i].weight = Tensor2(layers[i].weight.rows, layers[i].weight.cols);
        g[i].bias.assign(layers[i].bias.size(), 0.0);
        g[i].bn_gamma.assign(layers[i].bn_gamma.size(), 0.0);
        g[i].bn_beta.assign(layers[i].bn_beta.size(), 0.0);
    }
    return g;
}

Tensor2 layer_backward(const MlpLayer& layer, const LayerCache& c, const Tensor2& upstream,
                       LayerGrads& lg) {
    Tensor2 dh = upstream;
    {
        check_shape(dh.same_shape(c.output), "layer_backward upstream");
        const std::size_t m = dh.rows;
        const std::size_t d = dh.cols;

        if (c.dropout_mask.size() > 0)
            for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] *= c.dropout_mask.data[i];

        if (layer.has_relu)
            for (std::size_t i = 0; i < dh.data.size(); ++i)
                if (c.pre_relu.data[i] <= 0.0) dh.data[i] = 0.0;

        Tensor2 d_pre(m, d);
        if (layer.has_bn) {
            for (std::size_t j = 0; j < d; ++j) {
                double dgamma = 0.0, dbeta = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    dgamma += dh(i, j) * c.normalized(i, j);
                    dbeta += dh(i, j);
                }
                lg.bn_gamma[j] += dgamma;
                lg.bn_beta[j] += dbeta;

                if (c.mode == Mode::Train) {
                    // full backward through the minibatch statistics
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        const double dxhat = dh(i, j) * layer.bn_gamma[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * c.normalized(i, j);
                    }
                    const double inv_m = 1.0 / static_cast<double>(m);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double dxhat = dh(i, j) * layer.bn_gamma[j];
                        d_pre(i, j) = c.inv_std[j] *
                                      (dxhat - inv_m * sum_dxhat - inv_m * c.normalized(i, j) * sum_dxhat_xhat);
                    }
                } else {
                    for (std::size_t i = 0; i < m; ++i)
                        d_pre(i, j) = dh(i, j) * layer.bn_gamma[j] * c.inv_std[j];
                }
            }
        } else {
            d_pre = dh;
        }

        Tensor2 dw = matmul_tn(c.input, d_pre);
        for (std::size_t i = 0; i < dw.data.size(); ++i) lg.weight.data[i] += dw.data[i];
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += d_pre(i, j);
            lg.bias[j] += s;
        }
        dh = matmul_nt(d_pre, layer.weight);
    }
    return dh;
}

Tensor2 mlp_backward(const std::vector<MlpLayer>& layers, const ForwardCache& cache,
                     const Tensor2& upstream, std::vector<LayerGrads>& grads) {
    if (cache.layers.size() != layers.size())
        throw std::logic_error("mlp_backward: cache does not match layer stack");
    Tensor2 dh = upstream;
    for (std::size_t li = layers.size(); li-- > 0;)
        dh = layer_backward(layers[li], cache.layers[li], dh, grads[li]);
    return dh;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const std::string& name) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: size mismatch");
    if (state.first_moment.size() != params.size()) {
        state.first_moment.assign(params.size(), 0.0);
        state.second_moment.assign(params.size(), 0.0);
    }
    for (double g : grads)
        if (!std::isfinite(g))
            throw std::runtime_error("adam_step: non-finite gradient in " + name);
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& mo = state.first_moment[i];
        double& vo = state.second_moment[i];
        mo = state.beta1 * mo + (1.0 - state.beta1) * grads[i];
        vo = state.beta2 * vo + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = mo / bc1;
        const double vhat = vo / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

std::vector<std::span<double>> param_views(std::vector<MlpLayer>& layers) {
    std::vector<std::span<double>> v;
    for (auto& l : layers) {
        v.emplace_back(l.weight.data);
        v.emplace_back(l.bias);
        if (l.has_bn) {
            v.emplace_back(l.bn_gamma);
            v.emplace_back(l.bn_beta);
        }
    }
    return v;
}

std::vector<std::span<double>> grad_views(std::vector<LayerGrads>& grads) {
    std::vector<std::span<double>> v;
    for (auto& g : grads) {
        v.emplace_back(g.weight.data);
        v.emplace_back(g.bias);
        if (!g.bn_gamma.empty()) {
            v.emplace_back(g.bn_gamma);
            v.emplace_back(g.bn_beta);
        }
    }
    return v;
}

std::size_t param_count(const std::vector<MlpLayer>& layers) {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += l.weight.size() + l.bias.size();
        if (l.has_bn) n += l.bn_gamma.size() + l.bn_beta.size();
    }
    return n;
}

}  // namespace sca
