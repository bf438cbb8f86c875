#include "sca/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sca/special.hpp"

namespace sca {

void Batch::validate() const {
    if (x.rows < 1) throw std::invalid_argument("Batch: empty");
    if (t.size() != x.rows || l.size() != x.rows) throw std::invalid_argument("Batch: length mismatch");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t[i] > 0.0)) throw std::invalid_argument("Batch: times must be positive");
        if (l[i] > 1) throw std::invalid_argument("Batch: indicators must be 0/1");
    }
}

TimeGrid TimeGrid::from_times(const std::vector<double>& times) {
    TimeGrid g;
    g.points = times;
    std::sort(g.points.begin(), g.points.end());
    g.points.erase(std::unique(g.points.begin(), g.points.end()), g.points.end());
    if (!g.points.empty() && !(g.points.front() > 0.0))
        throw std::invalid_argument("TimeGrid: times must be positive");
    return g;
}

LossWithGrad accuracy_loss(const std::vector<double>& t, const std::vector<std::uint8_t>& l,
                           const std::vector<double>& generated) {
    if (generated.size() != t.size() || l.size() != t.size())
        throw std::invalid_argument("accuracy_loss: length mismatch");
    std::size_t n_cens = 0, n_obs = 0;
    for (std::uint8_t li : l) (li ? n_obs : n_cens)++;

    LossWithGrad out;
    out.grad.assign(t.size(), 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (l[i]) {
            const double d = generated[i] - t[i];
            out.value += std::abs(d) / static_cast<double>(n_obs);
            out.grad[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / static_cast<double>(n_obs);
        } else {
            const double h = t[i] - generated[i];
            if (h > 0.0) {
                out.value += h / static_cast<double>(n_cens);
                out.grad[i] = -1.0 / static_cast<double>(n_cens);
            }
        }
    }
    return out;
}

std::vector<double> pkm_curve(const std::vector<double>& times,
                              const std::vector<std::uint8_t>& events, const TimeGrid& grid) {
    if (times.empty()) throw std::domain_error("pkm_curve: empty input");
    if (times.size() != events.size()) throw std::invalid_argument("pkm_curve: length mismatch");

    std::vector<double> survival(grid.points.size());
    double s = 1.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
        const double ti = grid.points[i];
        double deaths = 0.0, at_risk = 0.0;
        for (std::size_t n = 0; n < times.size(); ++n) {
            const double tn = times[n];
            if (tn <= prev) continue;
            if (!events[n] && tn < ti) continue;  // censored inside the interval
            at_risk += 1.0;
            if (events[n] && tn <= ti) deaths += 1.0;
        }
        if (at_risk > 0.0) s *= 1.0 - deaths / at_risk;
        survival[i] = s;
        prev = ti;
    }
    return survival;
}

double default_temperature(const TimeGrid& grid) {
    const auto& g = grid.points;
    if (g.size() < 2) return 0.1 * std::max(g.empty() ? 1.0 : g.front(), 1e-3);
    std::vector<double> gaps(g.size() - 1);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) gaps[i] = g[i + 1] - g[i];
    const std::size_t mid = (gaps.size() - 1) / 2;
    std::nth_element(gaps.begin(), gaps.begin() + mid, gaps.end());
    return std::max(0.1 * gaps[mid], 1e-9);
}

namespace {

// Smoothed model curve: recursion of the point-estimate KM with sigmoid
// steps; every generated time is an event. Returns S over the grid and, on
// request, dS_i/df_j bookkeeping for the chain rule.
struct SmoothPkm {
    std::vector<double> survival;
    std::vector<double> factors;
    std::vector<double> deaths;   // d_i
    std::vector<double> at_risk;  // n_i
};

SmoothPkm smooth_model_pkm(const std::vector<double>& generated, const TimeGrid& grid,
                           double tau) {
    const std::size_t g = grid.points.size();
    const double m = static_cast<double>(generated.size());
    SmoothPkm out;
    out.survival.resize(g);
    out.factors.resize(g);
    out.deaths.resize(g);
    out.at_risk.resize(g);
    double s = 1.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        const double ti = grid.points[i];
        double d = 0.0, removed = 0.0;
        for (double tn : generated) {
            d += sigmoid((tn - prev) / tau) - sigmoid((tn - ti) / tau);
            removed += sigmoid((prev - tn) / tau);
        }
        const double n = std::max(m - removed, 1e-9);
        const double f = 1.0 - d / n;
        s *= f;
        out.survival[i] = s;
        out.factors[i] = f;
        out.deaths[i] = d;
        out.at_risk[i] = n;
        prev = ti;
    }
    return out;
}

}  // namespace

LossWithGrad calibration_loss(const Batch& batch, const std::vector<double>& generated,
                              const TimeGrid& grid, double temperature) {
    if (grid.points.empty()) throw std::invalid_argument("calibration_loss: empty grid");
    const std::size_t g = grid.points.size();
    const std::vector<double> data_curve = pkm_curve(batch.t, batch.l, grid);

    LossWithGrad out;
    if (temperature <= 0.0) {
        const std::vector<std::uint8_t> all_events(generated.size(), 1);
        const std::vector<double> model_curve = pkm_curve(generated, all_events, grid);
        for (std::size_t i = 0; i < g; ++i)
            out.value += std::abs(data_curve[i] - model_curve[i]);
        out.value /= static_cast<double>(g);
        return out;
    }

    const SmoothPkm model = smooth_model_pkm(generated, grid, temperature);
    for (std::size_t i = 0; i < g; ++i)
        out.value += std::abs(data_curve[i] - model.survival[i]);
    out.value /= static_cast<double>(g);

    // dL/dS_i, then fold the product structure into per-factor coefficients
    // G_j = sum_{i>=j} dL/dS_i * S_i / f_j.
    std::vector<double> dl_ds(g);
    for (std::size_t i = 0; i < g; ++i) {
        const double diff = model.survival[i] - data_curve[i];
        dl_ds[i] = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / static_cast<double>(g);
    }
    std::vector<double> coeff(g, 0.0);
    double suffix = 0.0;
    for (std::size_t j = g; j-- > 0;) {
        suffix += dl_ds[j] * model.survival[j];
        if (std::abs(model.factors[j]) > 1e-12) coeff[j] = suffix / model.factors[j];
    }

    out.grad.assign(generated.size(), 0.0);
    const double tau = temperature;
    double prev = 0.0;
    for (std::size_t j = 0; j < g; ++j) {
        const double tj = grid.points[j];
        const double inv_n = 1.0 / model.at_risk[j];
        const double dn_scale = model.deaths[j] * inv_n * inv_n;  // df/dn = d/n^2
        for (std::size_t k = 0; k < generated.size(); ++k) {
            const double tn = generated[k];
            const double s_lo = sigmoid((tn - prev) / tau);
            const double s_hi = sigmoid((tn - tj) / tau);
            const double s_rm = sigmoid((prev - tn) / tau);
            const double dd_dt = (s_lo * (1.0 - s_lo) - s_hi * (1.0 - s_hi)) / tau;
            const double dn_dt = s_rm * (1.0 - s_rm) / tau;  // n = m - sum sig((prev-t)/tau)
            const double df_dt = -dd_dt * inv_n + dn_scale * dn_dt;
            out.grad[k] += coeff[j] * df_dt;
        }
        prev = tj;
    }
    return out;
}

double total_loss(double clustering, double accuracy, double calibration, double lambda2,
                  double lambda3) {
    if (!(lambda2 > 0.0) || !(lambda3 > 0.0))
        throw std::invalid_argument("total_loss: weights must be positive");
    return clustering + lambda2 * accuracy + lambda3 * calibration;
}

}  // namespace sca
