// Acceptance suite: one line of PASS/FAIL per criterion, nonzero exit when a
// hard criterion fails. Oracles here are written independently of the library
// implementations (brute-force risk sets, Monte Carlo KL, finite differences).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdarg>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "sca/data.hpp"
#include "sca/dpmix.hpp"
#include "sca/losses.hpp"
#include "sca/metrics.hpp"
#include "sca/model.hpp"
#include "sca/trainer.hpp"
#include "test_util.hpp"

using namespace sca;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

int failures = 0;
int soft_failures = 0;

void report(int idx, const char* label, bool pass, const std::string& detail, bool soft = false) {
    std::printf("criterion %d %-28s %s  (%s)\n", idx, label,
                pass ? "PASS" : (soft ? "FAIL [soft]" : "FAIL"), detail.c_str());
    if (!pass) (soft ? soft_failures : failures) += 1;
}

void report_skip(int idx, const char* label, const std::string& detail) {
    std::printf("criterion %d %-28s SKIP  (%s)\n", idx, label, detail.c_str());
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. gradient suite
// ---------------------------------------------------------------------------

// Scalar training objective recomputed from scratch; the deterministic seed
// makes the stochastic pieces (generator noise) identical across evaluations.
double pipeline_loss(SurvivalModel model, const MixtureState& mix, const Batch& batch,
                     const TimeGrid& grid, double tau, std::uint64_t fseed) {
    Rng rng(fseed);
    const Tensor2 z = encode(model.encoder, batch.x, Mode::Train, rng);
    const std::vector<double> gen = generate_once(model.generator, z, Mode::Train, rng);
    return clustering_loss(mix, z).loss + accuracy_loss(batch.t, batch.l, gen).value +
           calibration_loss(batch, gen, grid, tau).value;
}

bool criterion_gradients(std::string& detail) {
    Timer timer;
    double max_rel = 0.0;
    const char* worst = "";
    // Central differences with h=1e-5 resolve a gradient down to roughly
    // 1e-9 absolute; below 1e-5 the relative comparison only measures that
    // noise floor, so tiny gradients are held to an absolute tolerance.
    double max_abs_small = 0.0;
    auto track = [&](const char* label, double analytic, double fd) {
        if (std::max(std::abs(analytic), std::abs(fd)) < 1e-5) {
            max_abs_small = std::max(max_abs_small, std::abs(analytic - fd));
            return;
        }
        const double r = testutil::rel_err(analytic, fd);
        if (r > max_rel) { max_rel = r; worst = label; }
        if (r > 1e-4 && std::getenv("SCA_VERBOSE"))
            std::printf("  grad mismatch %s: analytic %.6e fd %.6e\n", label, analytic, fd);
    };

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const std::size_t m = 8;
        ModelConfig mc;
        mc.covariate_dim = 5;
        mc.hidden_dim = 6;
        mc.latent_dim = 4;
        mc.noise_dim = 3;
        mc.dropout = 0.0;
        SurvivalModel model = make_model(mc, rng);

        Batch batch;
        batch.x = Tensor2(m, mc.covariate_dim);
        for (double& v : batch.x.data) v = rng.normal();
        for (std::size_t i = 0; i < m; ++i) {
            batch.t.push_back(rng.uniform(0.5, 4.0));
            batch.l.push_back(rng.uniform() < 0.7 ? 1 : 0);
        }
        const TimeGrid grid = TimeGrid::from_times(batch.t);
        const double tau = default_temperature(grid);

        MixtureState mix = MixtureState::uniform(4, mc.latent_dim, 2.5);
        for (double& v : mix.centroids.data) v = rng.normal();
        {
            double s = 0.0;
            for (double& p : mix.proportions) s += p = 0.1 + rng.uniform();
            for (double& p : mix.proportions) p /= s;
        }

        // analytic pass
        const std::uint64_t fseed = seed * 7919 + 3;
        Rng fwd(fseed);
        ForwardCache enc_cache;
        const Tensor2 z = encode(model.encoder, batch.x, Mode::Train, fwd, &enc_cache);
        GeneratorCache gen_cache;
        const std::vector<double> gen =
            generate_once(model.generator, z, Mode::Train, fwd, &gen_cache);

        const auto clus = clustering_loss(mix, z);
        const auto acc = accuracy_loss(batch.t, batch.l, gen);
        const auto cal = calibration_loss(batch, gen, grid, tau);

        std::vector<double> dt(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) dt[i] = acc.grad[i] + cal.grad[i];
        auto gen_grads = make_zero_grads(model.generator.layers);
        Tensor2 dz = generator_backward(model.generator, gen_cache, dt, gen_grads);
        for (std::size_t i = 0; i < dz.data.size(); ++i) dz.data[i] += clus.grad_z.data[i];
        auto enc_grads = make_zero_grads(model.encoder.layers);
        mlp_backward(model.encoder.layers, enc_cache, dz, enc_grads);

        // direct losses w.r.t. their own inputs
        for (std::size_t i = 0; i < m; ++i) {
            auto acc_at = [&](double v) {
                std::vector<double> g = gen;
                g[i] = v;
                return accuracy_loss(batch.t, batch.l, g).value;
            };
            auto cal_at = [&](double v) {
                std::vector<double> g = gen;
                g[i] = v;
                return calibration_loss(batch, g, grid, tau).value;
            };
            track("accuracy", acc.grad[i], testutil::central_diff(acc_at, gen[i]));
            track("calibration", cal.grad[i], testutil::central_diff(cal_at, gen[i]));
        }
        for (std::size_t i = 0; i < z.data.size(); ++i) {
            auto f = [&](double v) {
                Tensor2 zp = z;
                zp.data[i] = v;
                return clustering_loss(mix, zp).loss;
            };
            track("clustering-z", clus.grad_z.data[i], testutil::central_diff(f, z.data[i]));
        }
        for (std::size_t i = 0; i < mix.centroids.data.size(); ++i) {
            auto f = [&](double v) {
                MixtureState p = mix;
                p.centroids.data[i] = v;
                return clustering_loss(p, z).loss;
            };
            track("clustering-c", clus.grad_centroids.data[i],
                  testutil::central_diff(f, mix.centroids.data[i]));
        }

        // encoder and generator parameters through the whole objective
        auto check_stack = [&](std::vector<MlpLayer>& layers, std::vector<LayerGrads>& grads,
                               bool is_encoder) {
            auto views = param_views(layers);
            auto gviews = grad_views(grads);
            for (std::size_t v = 0; v < views.size(); ++v)
                for (std::size_t i = 0; i < views[v].size(); ++i) {
                    auto f = [&](double val) {
                        SurvivalModel pert = model;
                        auto pv = param_views(is_encoder ? pert.encoder.layers
                                                         : pert.generator.layers);
                        pv[v][i] = val;
                        return pipeline_loss(pert, mix, batch, grid, tau, fseed);
                    };
                    track(is_encoder ? "encoder" : "generator", gviews[v][i],
                          testutil::central_diff(f, views[v][i]));
                }
        };
        check_stack(model.encoder.layers, enc_grads, true);
        check_stack(model.generator.layers, gen_grads, false);
    }

    const double secs = timer.seconds();
    detail = fmt("max rel err %.2e (%s), below-resolution gap %.1e, %.1fs", max_rel, worst,
                 max_abs_small, secs);
    return max_rel < 1e-4 && max_abs_small < 1e-7 && secs < 60.0;
}

// ---------------------------------------------------------------------------
// 2. Dirichlet KL vs Monte Carlo
// ---------------------------------------------------------------------------

double gamma_draw(Rng& rng, double alpha) {  // Marsaglia-Tsang
    if (alpha < 1.0)
        return gamma_draw(rng, alpha + 1.0) * std::pow(rng.uniform(), 1.0 / alpha);
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double log_dirichlet_pdf(const std::vector<double>& x, const std::vector<double>& a) {
    double lp = 0.0, asum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        lp += (a[i] - 1.0) * std::log(x[i]) - std::lgamma(a[i]);
        asum += a[i];
    }
    return lp + std::lgamma(asum);
}

bool criterion_dirichlet_kl(std::string& detail) {
    Timer timer;
    const std::size_t n_samples = 1000000;
    double worst_sigmas = 0.0;

    Rng rng(42);
    bool zero_ok = true;
    for (int pair = 0; pair < 20; ++pair) {
        const std::size_t dim = 2 + rng.integer(5);
        std::vector<double> a(dim), b(dim);
        for (double& v : a) v = rng.uniform(0.5, 12.0);
        for (double& v : b) v = rng.uniform(0.5, 12.0);
        if (kl_dirichlet(a, a) != 0.0) zero_ok = false;

        double sum = 0.0, sumsq = 0.0;
        std::vector<double> x(dim);
        for (std::size_t s = 0; s < n_samples; ++s) {
            double tot = 0.0;
            for (std::size_t i = 0; i < dim; ++i) tot += x[i] = gamma_draw(rng, a[i]);
            for (double& v : x) v /= tot;
            const double r = log_dirichlet_pdf(x, a) - log_dirichlet_pdf(x, b);
            sum += r;
            sumsq += r * r;
        }
        const double mc = sum / n_samples;
        const double var = std::max(sumsq / n_samples - mc * mc, 0.0);
        const double se = std::sqrt(var / n_samples);
        const double closed = kl_dirichlet(a, b);
        worst_sigmas = std::max(worst_sigmas, std::abs(closed - mc) / std::max(se, 1e-300));
    }

    const double secs = timer.seconds();
    detail = fmt("worst deviation %.2f SE, kl(a,a)=0 %s, %.1fs", worst_sigmas,
                 zero_ok ? "exact" : "VIOLATED", secs);
    return worst_sigmas < 3.0 && zero_ok && secs < 120.0;
}

// ---------------------------------------------------------------------------
// 3. Kaplan-Meier / PKM oracle equivalence
// ---------------------------------------------------------------------------

bool criterion_km(std::string& detail) {
    Rng rng(7);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.integer(20);
        std::vector<double> t;
        std::vector<std::uint8_t> l;
        bool any_event = false;
        for (std::size_t i = 0; i < n; ++i) {
            t.push_back(1.0 + rng.integer(8));
            l.push_back(rng.uniform() < 0.7 ? 1 : 0);
            any_event |= l.back() == 1;
        }
        if (!any_event) l[0] = 1;

        const auto oracle = testutil::brute_force_km(t, l);
        const auto km = kaplan_meier(t, l);
        if (km.times.size() != oracle.size()) return detail = "distinct-time mismatch", false;
        for (std::size_t i = 0; i < oracle.size(); ++i) {
            if (km.times[i] != oracle[i].first) return detail = "time grid mismatch", false;
            worst = std::max(worst, std::abs(km.survival[i] - oracle[i].second));
        }

        // product-limit via the interval estimator on the distinct-time grid
        const TimeGrid grid = TimeGrid::from_times(t);
        const auto pkm = pkm_curve(t, l, grid);
        for (std::size_t i = 0; i < km.times.size(); ++i) {
            for (std::size_t g = 0; g < grid.points.size(); ++g)
                if (grid.points[g] == km.times[i])
                    worst = std::max(worst, std::abs(pkm[g] - km.survival[i]));
        }

        // zero censoring: survival equals the empirical fraction exactly
        std::vector<std::uint8_t> all(n, 1);
        const auto full = kaplan_meier(t, all);
        for (std::size_t i = 0; i < full.times.size(); ++i) {
            double frac = 0.0;
            for (double tn : t) frac += tn > full.times[i] ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(full.survival[i] - frac / static_cast<double>(n)));
        }
    }
    detail = fmt("100 instances, worst abs gap %.2e", worst);
    return worst <= 1e-12;
}

// ---------------------------------------------------------------------------
// 4. logrank correctness
// ---------------------------------------------------------------------------

bool criterion_logrank(std::string& detail) {
    Rng rng(11);
    double worst_zero = 0.0, worst_gap = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        auto gen = [&](std::size_t n) {
            SurvivalGroup g;
            for (std::size_t i = 0; i < n; ++i) {
                g.times.push_back(1.0 + rng.integer(10));
                g.events.push_back(rng.uniform() < 0.7 ? 1 : 0);
            }
            return g;
        };
        const SurvivalGroup a = gen(1 + rng.integer(15));
        const SurvivalGroup b = gen(1 + rng.integer(15));
        worst_zero = std::max(worst_zero, std::abs(logrank_pair(a, a)));
        worst_gap =
            std::max(worst_gap, std::abs(logrank_pair(a, b) - testutil::brute_force_logrank(a, b)));
    }
    detail = fmt("identical-group stat %.1e, worst oracle gap %.1e", worst_zero, worst_gap);
    return worst_zero <= 1e-9 && worst_gap <= 1e-9;
}

// ---------------------------------------------------------------------------
// 5-7. synthetic benchmark (single seeded run shared by three criteria)
// ---------------------------------------------------------------------------

struct BenchResult {
    double fit_seconds = 0.0;
    std::size_t effective_k = 0;
    double ari = 0.0;
    double score_model = 0.0;
    double score_baseline = 0.0;
    double cal_slope = 0.0;
    double cal_loss = 0.0;
    double cindex = 0.0;
    double rae_uncensored = 0.0;
    double cindex_untrained = 0.0;
};

TrainConfig benchmark_config() {
    TrainConfig cfg;
    cfg.truncation = 25;
    cfg.gamma0 = 3.0;
    cfg.latent_dim = 2;
    cfg.dropout = 0.0;
    cfg.pretrain_epochs = 100;
    cfg.max_epochs = 400;
    cfg.patience = 60;
    cfg.seed = 3;
    return cfg;
}

BenchResult run_benchmark() {
    BenchResult out;
    const Dataset data = synth_generate(700, 3, 1);
    const TrainConfig cfg = benchmark_config();

    Timer fit_timer;
    FitResult r = fit(cfg, data);
    out.fit_seconds = fit_timer.seconds();

    const Batch test = data.subset(Split::Test);
    std::vector<std::size_t> truth;
    for (std::size_t i : data.indices(Split::Test)) truth.push_back(data.true_labels[i]);

    Rng eval(cfg.seed ^ 0xe7a1);
    const Tensor2 z = encode(r.model.encoder, test.x, Mode::Eval, eval);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < z.rows; ++i) labels.push_back(assign(r.mixture, z.row(i)));

    out.effective_k = effective_k(r.mixture, z);
    out.ari = testutil::adjusted_rand_index(labels, truth);
    out.score_model = logrank_score(labels, test.t, test.l).value_or(0.0);

    // covariate-only baseline: ten k-means restarts, keep the lowest inertia
    double best_inertia = 1e300;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const KMeansResult km = kmeans(test.x, 3, s);
        double inertia = 0.0;
        for (std::size_t i = 0; i < test.x.rows; ++i)
            for (std::size_t j = 0; j < test.x.cols; ++j) {
                const double d = test.x(i, j) - km.centroids(km.labels[i], j);
                inertia += d * d;
            }
        if (inertia < best_inertia) {
            best_inertia = inertia;
            out.score_baseline = logrank_score(km.labels, test.t, test.l).value_or(0.0);
        }
    }

    // ranking / accuracy
    EventSampleSet samples = sample_times(r.model.generator, z, 200, Mode::Eval, eval);
    const std::vector<double> med = predict_median(samples);
    out.cindex = c_index(med, test.t, test.l).value_or(0.0);
    out.rae_uncensored = rae(med, test.t, test.l).uncensored.value_or(1e300);

    // calibration: pooled model survival vs Kaplan-Meier at event-time deciles
    const TimeGrid grid = TimeGrid::from_times(test.t);
    out.cal_loss = calibration_loss(test, generate_once(r.model.generator, z, Mode::Eval, eval),
                                    grid, 0.0)
                       .value;
    const auto deciles = decile_times(test.t, test.l);
    const auto km_curve = kaplan_meier(test.t, test.l);
    std::vector<double> model_s, empirical_s;
    for (double d : deciles) {
        double surv = 0.0;
        for (double v : samples.samples.data) surv += v > d ? 1.0 : 0.0;
        model_s.push_back(surv / static_cast<double>(samples.samples.data.size()));
        empirical_s.push_back(km_curve.at(d));
    }
    out.cal_slope = calibration_slope(model_s, empirical_s).value_or(0.0);

    // negative control: untrained models rank randomly. One random network
    // can land anywhere in roughly [0.3, 0.65] on its own, so the control
    // averages several independent initializations.
    double sum_ci = 0.0;
    const int n_blank = 8;
    for (int j = 0; j < n_blank; ++j) {
        Rng fresh(cfg.seed * 1000 + static_cast<std::uint64_t>(j));
        ModelConfig mc;
        mc.covariate_dim = test.x.cols;
        mc.hidden_dim = cfg.hidden_dim;
        mc.latent_dim = cfg.latent_dim;
        mc.noise_dim = cfg.noise_dim;
        mc.dropout = cfg.dropout;
        SurvivalModel blank = make_model(mc, fresh);
        const Tensor2 z0 = encode(blank.encoder, test.x, Mode::Eval, fresh);
        const std::vector<double> med0 =
            predict_median(sample_times(blank.generator, z0, 200, Mode::Eval, fresh));
        sum_ci += c_index(med0, test.t, test.l).value_or(0.0);
    }
    out.cindex_untrained = sum_ci / n_blank;
    return out;
}

// ---------------------------------------------------------------------------
// 8. simplex / stick invariants
// ---------------------------------------------------------------------------

bool criterion_simplex(std::string& detail) {
    Rng rng(5);
    double worst = 0.0;
    std::size_t ops = 0;
    while (ops < 10000) {
        const std::size_t k = 1 + rng.integer(10);
        const std::size_t d = 1 + rng.integer(4);
        MixtureState st = MixtureState::uniform(k, d, 0.3 + 5.0 * rng.uniform());
        for (double& v : st.centroids.data) v = rng.normal() * 3.0;
        Tensor2 z(1 + rng.integer(8), d);
        for (double& v : z.data) v = rng.normal() * 3.0;

        const auto q = responsibilities_q(st, z);
        const auto p = responsibilities_p(st, z);
        for (std::size_t i = 0; i < z.rows; ++i) {
            double sq = 0.0, sp = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                if (q.resp(i, j) < 0.0 || p.resp(i, j) < 0.0) worst = 1.0;
                sq += q.resp(i, j);
                sp += p.resp(i, j);
            }
            worst = std::max({worst, std::abs(sq - 1.0), std::abs(sp - 1.0)});
        }
        update_proportions(st, q.dirichlet);
        double s = 0.0;
        for (double v : st.proportions) s += v;
        worst = std::max(worst, std::abs(s - 1.0));

        const auto w = stick_weights(k, st.concentration);
        double ws = 0.0;
        for (double v : w) ws += v;
        if (ws != 1.0) worst = std::max(worst, std::abs(ws - 1.0));
        ops += 3 + z.rows;
    }

    // gamma0 = 1 halves the remaining stick at every break
    const auto w = stick_weights(4, 1.0);
    const bool halves = w[0] == 0.5 && w[1] == 0.25 && w[2] == 0.125 && w[3] == 0.125;
    detail = fmt("worst simplex deviation %.1e, halving stick %s", worst, halves ? "ok" : "wrong");
    return worst < 1e-9 && halves;
}

// ---------------------------------------------------------------------------
// 9. public-data end-to-end (soft)
// ---------------------------------------------------------------------------

void criterion_public_data() {
    const char* env = std::getenv("SCA_FLCHAIN");
    std::string path = env ? env : "data/flchain.csv";
    if (!std::filesystem::exists(path)) {
        report_skip(9, "public-data pipeline [soft]",
                    "dataset not present; set SCA_FLCHAIN to a local flchain.csv to enable");
        return;
    }
    Schema schema;
    schema.time_column = "futime";
    schema.event_column = "death";
    schema.categorical = {"sex", "flc.grp", "mgus", "sample.yr"};
    schema.drop = {"chapter", ""};
    std::vector<double> slopes;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const Dataset data = build_dataset(path, schema, seed);
        TrainConfig cfg = benchmark_config();
        cfg.seed = seed;
        FitResult r = fit(cfg, data);
        const Batch test = data.subset(Split::Test);
        Rng eval(seed ^ 0xe7a1);
        const Tensor2 z = encode(r.model.encoder, test.x, Mode::Eval, eval);
        EventSampleSet samples = sample_times(r.model.generator, z, 200, Mode::Eval, eval);
        const auto deciles = decile_times(test.t, test.l);
        const auto km_curve = kaplan_meier(test.t, test.l);
        std::vector<double> model_s, empirical_s;
        for (double d : deciles) {
            double surv = 0.0;
            for (double v : samples.samples.data) surv += v > d ? 1.0 : 0.0;
            model_s.push_back(surv / static_cast<double>(samples.samples.data.size()));
            empirical_s.push_back(km_curve.at(d));
        }
        slopes.push_back(calibration_slope(model_s, empirical_s).value_or(0.0));
    }
    bool ok = true;
    for (double s : slopes) ok &= s >= 0.84 && s <= 1.14;
    report(9, "public-data pipeline [soft]", ok,
           fmt("slopes %.3f %.3f %.3f", slopes[0], slopes[1], slopes[2]), true);
}

}  // namespace

int main() {
    std::string detail;

    bool ok = criterion_gradients(detail);
    report(1, "gradient suite", ok, detail);

    ok = criterion_dirichlet_kl(detail);
    report(2, "dirichlet kl vs monte carlo", ok, detail);

    ok = criterion_km(detail);
    report(3, "product-limit oracle", ok, detail);

    ok = criterion_logrank(detail);
    report(4, "logrank oracle", ok, detail);

    const BenchResult b = run_benchmark();
    const double ratio = b.score_model / std::max(b.score_baseline, 1e-12);
    report(5, "synthetic clustering",
           b.effective_k >= 3 && b.effective_k <= 6 && b.ari >= 0.8 && ratio >= 5.0 &&
               b.fit_seconds < 900.0,
           fmt("effective K=%zu, ARI=%.3f, logrank ratio=%.1f, fit %.0fs", b.effective_k, b.ari,
               ratio, b.fit_seconds));
    report(6, "synthetic calibration", b.cal_slope >= 0.85 && b.cal_slope <= 1.15 && b.cal_loss < 0.05,
           fmt("slope=%.3f, calibration loss=%.4f", b.cal_slope, b.cal_loss));
    report(7, "synthetic ranking/accuracy",
           b.cindex >= 0.70 && b.rae_uncensored <= 0.60 && b.cindex_untrained >= 0.4 &&
               b.cindex_untrained <= 0.6,
           fmt("c-index=%.3f, uncensored rae=%.3f, untrained c-index=%.3f", b.cindex,
               b.rae_uncensored, b.cindex_untrained));

    ok = criterion_simplex(detail);
    report(8, "simplex/stick invariants", ok, detail);

    criterion_public_data();

    if (failures == 0)
        std::printf("acceptance: all hard criteria passed%s\n",
                    soft_failures ? " (soft criterion failed)" : "");
    else
        std::printf("acceptance: %d hard criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
