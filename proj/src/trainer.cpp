#include "sca/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "sca/losses.hpp"

namespace sca {

void TrainConfig::validate() const {
    if (truncation < 1) throw ConfigError("config field 'truncation' must be >= 1");
    if (gamma0_grid.empty()) throw ConfigError("config field 'gamma0_grid' must be non-empty");
    for (double g : gamma0_grid)
        if (!(g > 0.0)) throw ConfigError("config field 'gamma0_grid' entries must be > 0");
    if (!(gamma0 > 0.0)) throw ConfigError("config field 'gamma0' must be > 0");
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("config field 'eta' must be in (0,1)");
    if (nu < 1.0) throw ConfigError("config field 'nu' must be >= 1");
    if (batch_size < 2) throw ConfigError("config field 'batch_size' must be >= 2");
    if (!(lr > 0.0)) throw ConfigError("config field 'lr' must be > 0");
    if (!(lambda2 > 0.0)) throw ConfigError("config field 'lambda2' must be > 0");
    if (!(lambda3 > 0.0)) throw ConfigError("config field 'lambda3' must be > 0");
    if (hidden_dim < 1) throw ConfigError("config field 'hidden_dim' must be >= 1");
    if (latent_dim < 1) throw ConfigError("config field 'latent_dim' must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("config field 'dropout' must be in [0,1)");
}

KMeansResult kmeans(const Tensor2& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.rows;
    const std::size_t d = points.cols;
    if (n < k) throw std::domain_error("kmeans: fewer points than clusters");
    Rng rng(seed);

    // k-means++ seeding
    Tensor2 centroids(k, d);
    std::vector<double> dist2(n, INFINITY);
    {
        const std::size_t first = rng.integer(n);
        std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());
        for (std::size_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                dist2[i] = std::min(dist2[i], squared_distance(points.row(i), centroids.row(c - 1)));
                total += dist2[i];
            }
            std::size_t chosen = n - 1;
            if (total > 0.0) {
                double r = rng.uniform() * total;
                for (std::size_t i = 0; i < n; ++i) {
                    r -= dist2[i];
                    if (r <= 0.0) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = rng.integer(n);
            }
            std::copy(points.row(chosen).begin(), points.row(chosen).end(), centroids.row(c).begin());
        }
    }

    std::vector<std::size_t> labels(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = INFINITY;
            for (std::size_t c = 0; c < k; ++c) {
                const double d2 = squared_distance(points.row(i), centroids.row(c));
                if (d2 < best) {
                    best = d2;
                    labels[i] = c;
                }
            }
        }
        Tensor2 next(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[labels[i]];
            for (std::size_t j = 0; j < d; ++j) next(labels[i], j) += points(i, j);
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // reseed to the farthest point from its centroid
                double far = -1.0;
                std::size_t pick = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d2 = squared_distance(points.row(i), centroids.row(labels[i]));
                    if (d2 > far) {
                        far = d2;
                        pick = i;
                    }
                }
                std::copy(points.row(pick).begin(), points.row(pick).end(), next.row(c).begin());
                labels[pick] = c;
            } else {
                for (std::size_t j = 0; j < d; ++j) next(c, j) /= static_cast<double>(counts[c]);
            }
        }
        double shift = 0.0;
        for (std::size_t i = 0; i < centroids.size(); ++i)
            shift = std::max(shift, std::abs(next.data[i] - centroids.data[i]));
        centroids = std::move(next);
        if (shift < 1e-6) break;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double best = INFINITY;
        for (std::size_t c = 0; c < k; ++c) {
            const double d2 = squared_distance(points.row(i), centroids.row(c));
            if (d2 < best) {
                best = d2;
                labels[i] = c;
            }
        }
    }
    return {std::move(centroids), std::move(labels)};
}

namespace {

// Adam over a sequence of spans sharing one moment buffer.
struct GroupOptimizer {
    AdamState state;

    void step(std::vector<std::span<double>> params, std::vector<std::span<double>> grads,
              const std::string& name) {
        std::size_t total = 0;
        for (const auto& p : params) total += p.size();
        if (state.first_moment.size() != total) {
            state.first_moment.assign(total, 0.0);
            state.second_moment.assign(total, 0.0);
        }
        for (const auto& g : grads)
            for (double v : g)
                if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + name);
        ++state.step_count;
        const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
        const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
        std::size_t off = 0;
        for (std::size_t v = 0; v < params.size(); ++v) {
            auto p = params[v];
            auto g = grads[v];
            for (std::size_t i = 0; i < p.size(); ++i, ++off) {
                double& mo = state.first_moment[off];
                double& vo = state.second_moment[off];
                mo = state.beta1 * mo + (1.0 - state.beta1) * g[i];
                vo = state.beta2 * vo + (1.0 - state.beta2) * g[i] * g[i];
                p[i] -= state.lr * (mo / bc1) / (std::sqrt(vo / bc2) + state.eps);
            }
        }
    }
};

struct StepLosses {
    double dp = 0.0, acc = 0.0, cal = 0.0;
    double total(const TrainConfig& c) const { return dp + c.lambda2 * acc + c.lambda3 * cal; }
};

// One SGD step on a minibatch. Clustering objective only when `mixture` is
// non-null; xi of the minibatch is returned through it via the pi update.
StepLosses train_step(SurvivalModel& model, MixtureState* mixture, const TrainConfig& config,
                      const Batch& batch, Rng& rng, GroupOptimizer& opt_enc,
                      GroupOptimizer& opt_gen, GroupOptimizer& opt_centroids) {
    ForwardCache enc_cache;
    const Tensor2 z = encode(model.encoder, batch.x, Mode::Train, rng, &enc_cache);

    GeneratorCache gen_cache;
    const std::vector<double> generated =
        generate_once(model.generator, z, Mode::Train, rng, &gen_cache);

    const LossWithGrad acc = accuracy_loss(batch.t, batch.l, generated);
    const TimeGrid grid = TimeGrid::from_times(batch.t);
    const LossWithGrad cal = calibration_loss(batch, generated, grid, default_temperature(grid));

    StepLosses losses;
    losses.acc = acc.value;
    losses.cal = cal.value;

    std::vector<double> dt(generated.size());
    for (std::size_t i = 0; i < dt.size(); ++i)
        dt[i] = config.lambda2 * acc.grad[i] + config.lambda3 * cal.grad[i];

    std::vector<LayerGrads> gen_grads = make_zero_grads(model.generator.layers);
    Tensor2 dz = generator_backward(model.generator, gen_cache, dt, gen_grads);

    ClusteringLossResult clust;
    if (mixture) {
        clust = clustering_loss(*mixture, z);
        losses.dp = clust.loss;
        for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += clust.grad_z.data[i];
    }

    std::vector<LayerGrads> enc_grads = make_zero_grads(model.encoder.layers);
    mlp_backward(model.encoder.layers, enc_cache, dz, enc_grads);

    opt_enc.step(param_views(model.encoder.layers), grad_views(enc_grads), "encoder");
    opt_gen.step(param_views(model.generator.layers), grad_views(gen_grads), "generator");
    if (mixture) {
        opt_centroids.step({std::span<double>(mixture->centroids.data)},
                           {std::span<double>(clust.grad_centroids.data)}, "centroids");
        update_proportions(*mixture, clust.xi);
    }

    const double total = losses.total(config);
    if (!std::isfinite(total)) throw NumericError("training diverged: non-finite loss");
    return losses;
}

Batch gather_batch(const Dataset& data, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
    Batch b;
    b.x = Tensor2(end - begin, data.x.cols);
    for (std::size_t r = begin; r < end; ++r) {
        auto src = data.x.row(idx[r]);
        std::copy(src.begin(), src.end(), b.x.row(r - begin).begin());
        b.t.push_back(data.t[idx[r]]);
        b.l.push_back(data.l[idx[r]]);
    }
    return b;
}

constexpr std::uint64_t kEvalNoiseSalt = 0x5ca1ab1e;

// Validation accuracy+calibration only, for pretraining records.
double evaluate_acc_cal(SurvivalModel& model, const TrainConfig& config, const Batch& batch,
                        std::uint64_t noise_seed) {
    Rng rng(noise_seed);
    const Tensor2 z = encode(model.encoder, batch.x, Mode::Eval, rng);
    const std::vector<double> generated = generate_once(model.generator, z, Mode::Eval, rng);
    const LossWithGrad acc = accuracy_loss(batch.t, batch.l, generated);
    const TimeGrid grid = TimeGrid::from_times(batch.t);
    const LossWithGrad cal = calibration_loss(batch, generated, grid, 0.0);
    return config.lambda2 * acc.value + config.lambda3 * cal.value;
}

}  // namespace

double evaluate_total_loss(SurvivalModel& model, const MixtureState& mixture,
                           const TrainConfig& config, const Batch& batch,
                           std::uint64_t noise_seed) {
    Rng rng(noise_seed);
    const Tensor2 z = encode(model.encoder, batch.x, Mode::Eval, rng);
    const std::vector<double> generated = generate_once(model.generator, z, Mode::Eval, rng);
    const LossWithGrad acc = accuracy_loss(batch.t, batch.l, generated);
    const TimeGrid grid = TimeGrid::from_times(batch.t);
    const LossWithGrad cal = calibration_loss(batch, generated, grid, 0.0);
    const ClusteringLossResult clust = clustering_loss(mixture, z);
    return total_loss(clust.loss, acc.value, cal.value, config.lambda2, config.lambda3);
}

void pretrain(SurvivalModel& model, const TrainConfig& config, const Dataset& data,
              TrainRecord* record) {
    config.validate();
    Rng rng(config.seed ^ 0x70726574);
    GroupOptimizer opt_enc, opt_gen, opt_cen;
    opt_enc.state.lr = opt_gen.state.lr = opt_cen.state.lr = config.lr;

    std::vector<std::size_t> train_idx = data.indices(Split::Train);
    const std::size_t m = std::min(config.batch_size, train_idx.size());
    for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(train_idx.begin(), train_idx.end(), rng.engine());
        StepLosses epoch_losses;
        std::size_t steps = 0;
        for (std::size_t begin = 0; begin + 2 <= train_idx.size(); begin += m) {
            const std::size_t end = std::min(begin + m, train_idx.size());
            if (end - begin < 2) break;
            const Batch batch = gather_batch(data, train_idx, begin, end);
            const StepLosses s =
                train_step(model, nullptr, config, batch, rng, opt_enc, opt_gen, opt_cen);
            epoch_losses.acc += s.acc;
            epoch_losses.cal += s.cal;
            ++steps;
        }
        if (record && steps > 0) {
            EpochRecord rec;
            rec.epoch = epoch;
            rec.joint = false;
            rec.loss_acc = epoch_losses.acc / static_cast<double>(steps);
            rec.loss_cal = epoch_losses.cal / static_cast<double>(steps);
            rec.loss_total = config.lambda2 * rec.loss_acc + config.lambda3 * rec.loss_cal;
            rec.val_total = evaluate_acc_cal(model, config, data.subset(Split::Val),
                                             config.seed ^ kEvalNoiseSalt);
            rec.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            record->epochs.push_back(rec);
        }
    }
}

FitResult fit(const TrainConfig& config, const Dataset& data) {
    config.validate();
    if (data.indices(Split::Train).empty()) throw DataError("fit: empty training split");
    if (data.indices(Split::Val).empty()) throw DataError("fit: empty validation split");

    Rng init_rng(config.seed);
    ModelConfig mc;
    mc.covariate_dim = data.x.cols;
    mc.hidden_dim = config.hidden_dim;
    mc.latent_dim = config.latent_dim;
    mc.noise_dim = config.noise_dim;
    mc.noise_kind = config.noise_kind;
    mc.dropout = config.dropout;

    FitResult result;
    result.model = make_model(mc, init_rng);

    pretrain(result.model, config, data, &result.record);

    // Centroid init: K-means on the pretrained latents, components ordered by
    // cluster size so heavy components sit on the large early stick weights.
    std::vector<std::size_t> train_idx = data.indices(Split::Train);
    Rng scratch(config.seed ^ 0x6b6d);
    const Batch train_all = data.subset(Split::Train);
    const Tensor2 z_train = encode(result.model.encoder, train_all.x, Mode::Eval, scratch);
    const KMeansResult km = kmeans(z_train, config.truncation, config.seed ^ 0x6b6d65616e);

    result.mixture = MixtureState::uniform(config.truncation, config.latent_dim, config.gamma0,
                                           config.nu, config.eta);
    {
        std::vector<std::size_t> counts(config.truncation, 0);
        for (std::size_t lab : km.labels) ++counts[lab];
        std::vector<std::size_t> order(config.truncation);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&counts](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
        for (std::size_t c = 0; c < config.truncation; ++c)
            std::copy(km.centroids.row(order[c]).begin(), km.centroids.row(order[c]).end(),
                      result.mixture.centroids.row(c).begin());
    }

    Rng rng(config.seed ^ 0x6a6f696e74);
    GroupOptimizer opt_enc, opt_gen, opt_cen;
    opt_enc.state.lr = opt_gen.state.lr = opt_cen.state.lr = config.lr;

    const Batch val_batch = data.subset(Split::Val);
    const std::size_t m = std::min(config.batch_size, train_idx.size());

    SurvivalModel best_model = result.model;
    MixtureState best_mixture = result.mixture;
    double best_val =
        evaluate_total_loss(result.model, result.mixture, config, val_batch,
                            config.seed ^ kEvalNoiseSalt);
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(train_idx.begin(), train_idx.end(), rng.engine());
        StepLosses epoch_losses;
        std::size_t steps = 0;
        for (std::size_t begin = 0; begin + 2 <= train_idx.size(); begin += m) {
            const std::size_t end = std::min(begin + m, train_idx.size());
            if (end - begin < 2) break;
            const Batch batch = gather_batch(data, train_idx, begin, end);
            const StepLosses s = train_step(result.model, &result.mixture, config, batch, rng,
                                            opt_enc, opt_gen, opt_cen);
            epoch_losses.dp += s.dp;
            epoch_losses.acc += s.acc;
            epoch_losses.cal += s.cal;
            ++steps;
        }

        const double val = evaluate_total_loss(result.model, result.mixture, config, val_batch,
                                               config.seed ^ kEvalNoiseSalt);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.joint = true;
        rec.loss_dp = epoch_losses.dp / static_cast<double>(steps);
        rec.loss_acc = epoch_losses.acc / static_cast<double>(steps);
        rec.loss_cal = epoch_losses.cal / static_cast<double>(steps);
        rec.loss_total = rec.loss_dp + config.lambda2 * rec.loss_acc + config.lambda3 * rec.loss_cal;
        rec.val_total = val;
        {
            Rng eval_rng(config.seed ^ kEvalNoiseSalt);
            const Tensor2 z_all = encode(result.model.encoder, train_all.x, Mode::Eval, eval_rng);
            rec.effective_k = effective_k(result.mixture, z_all);
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.record.epochs.push_back(rec);

        if (val < best_val) {
            best_val = val;
            best_model = result.model;
            best_mixture = result.mixture;
            since_best = 0;
        } else if (++since_best > config.patience) {
            break;
        }
    }

    result.model = std::move(best_model);
    result.mixture = std::move(best_mixture);
    result.best_val_loss = best_val;
    return result;
}

GridSearchResult grid_search(const TrainConfig& config, const Dataset& data) {
    config.validate();
    GridSearchResult out;
    bool have_best = false;
    for (double g : config.gamma0_grid) {
        TrainConfig c = config;
        c.gamma0 = g;
        FitResult r = fit(c, data);
        out.candidates.emplace_back(g, r.best_val_loss);
        if (!have_best || r.best_val_loss < out.best.best_val_loss) {
            out.best = std::move(r);
            out.best_gamma0 = g;
            have_best = true;
        }
    }
    return out;
}

}  // namespace sca
