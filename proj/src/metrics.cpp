#include "sca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace sca {

double SurvivalCurve::at(double t) const {
    double s = 1.0;
    for (std::size_t i = 0; i < times.size() && times[i] <= t; ++i) s = survival[i];
    return s;
}

SurvivalCurve kaplan_meier(const std::vector<double>& times,
                           const std::vector<std::uint8_t>& events) {
    if (times.empty()) throw std::domain_error("kaplan_meier: empty input");
    if (times.size() != events.size()) throw std::invalid_argument("kaplan_meier: length mismatch");

    std::vector<double> distinct;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (events[i]) distinct.push_back(times[i]);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    SurvivalCurve curve;
    double s = 1.0;
    double greenwood = 0.0;
    for (double ti : distinct) {
        double at_risk = 0.0, deaths = 0.0;
        for (std::size_t n = 0; n < times.size(); ++n) {
            if (times[n] >= ti) at_risk += 1.0;
            if (events[n] && times[n] == ti) deaths += 1.0;
        }
        s *= 1.0 - deaths / at_risk;
        if (at_risk > deaths)
            greenwood += deaths / (at_risk * (at_risk - deaths));
        curve.times.push_back(ti);
        curve.survival.push_back(s);
        curve.variance.push_back(s == 0.0 ? 0.0 : s * s * greenwood);
    }
    return curve;
}

double logrank_pair(const SurvivalGroup& a, const SurvivalGroup& b) {
    if (a.times.empty() || b.times.empty())
        throw std::invalid_argument("logrank_pair: empty group");

    std::set<double> event_times;
    for (std::size_t i = 0; i < a.times.size(); ++i)
        if (a.events[i]) event_times.insert(a.times[i]);
    for (std::size_t i = 0; i < b.times.size(); ++i)
        if (b.events[i]) event_times.insert(b.times[i]);
    if (event_times.empty()) return 0.0;

    double observed_a = 0.0, expected_a = 0.0, variance = 0.0;
    for (double ti : event_times) {
        double n1 = 0.0, n2 = 0.0, d1 = 0.0, d2 = 0.0;
        for (std::size_t i = 0; i < a.times.size(); ++i) {
            if (a.times[i] >= ti) n1 += 1.0;
            if (a.events[i] && a.times[i] == ti) d1 += 1.0;
        }
        for (std::size_t i = 0; i < b.times.size(); ++i) {
            if (b.times[i] >= ti) n2 += 1.0;
            if (b.events[i] && b.times[i] == ti) d2 += 1.0;
        }
        const double n = n1 + n2;
        const double d = d1 + d2;
        if (n < 1.0) continue;
        observed_a += d1;
        expected_a += d * n1 / n;
        if (n > 1.0) variance += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1.0);
    }
    if (variance <= 0.0) return 0.0;
    const double diff = observed_a - expected_a;
    return diff * diff / variance;
}

std::optional<double> logrank_score(const std::vector<std::size_t>& assignments,
                                    const std::vector<double>& times,
                                    const std::vector<std::uint8_t>& events) {
    std::map<std::size_t, SurvivalGroup> groups;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        auto& g = groups[assignments[i]];
        g.times.push_back(times[i]);
        g.events.push_back(events[i]);
    }
    if (groups.size() < 2) return std::nullopt;  // no clustering structure
    std::vector<const SurvivalGroup*> list;
    for (const auto& [_, g] : groups) list.push_back(&g);
    double score = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = i + 1; j < list.size(); ++j)
            score += logrank_pair(*list[i], *list[j]);
    return score;
}

std::optional<double> c_index(const std::vector<double>& predicted,
                              const std::vector<double>& times,
                              const std::vector<std::uint8_t>& events) {
    if (predicted.size() != times.size() || events.size() != times.size())
        throw std::invalid_argument("c_index: length mismatch");
    double concordant = 0.0, comparable = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!events[i]) continue;
        for (std::size_t j = 0; j < times.size(); ++j) {
            if (times[i] >= times[j] || i == j) continue;
            comparable += 1.0;
            if (predicted[i] < predicted[j])
                concordant += 1.0;
            else if (predicted[i] == predicted[j])
                concordant += 0.5;
        }
    }
    if (comparable == 0.0) return std::nullopt;
    return concordant / comparable;
}

RaePair rae(const std::vector<double>& predicted, const std::vector<double>& times,
            const std::vector<std::uint8_t>& events) {
    RaePair out;
    double sum_u = 0.0, sum_c = 0.0;
    std::size_t n_u = 0, n_c = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0)) throw std::invalid_argument("rae: times must be positive");
        if (events[i]) {
            sum_u += std::min(std::abs(predicted[i] - times[i]) / times[i], 1.0);
            ++n_u;
        } else {
            sum_c += std::min(std::max(0.0, times[i] - predicted[i]) / times[i], 1.0);
            ++n_c;
        }
    }
    if (n_u) out.uncensored = sum_u / static_cast<double>(n_u);
    if (n_c) out.censored = sum_c / static_cast<double>(n_c);
    return out;
}

double mean_cov(const EventSampleSet& samples) {
    const std::size_t s = samples.draws();
    if (s < 2) throw std::invalid_argument("mean_cov: need at least 2 samples per individual");
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < samples.samples.rows; ++i) {
        auto row = samples.samples.row(i);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(s);
        if (mean == 0.0) continue;  // cannot occur for positive times
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s - 1);
        total += std::sqrt(var) / mean;
        ++counted;
    }
    return counted ? total / static_cast<double>(counted) : 0.0;
}

std::optional<double> calibration_slope(const std::vector<double>& model_points,
                                        const std::vector<double>& empirical_points) {
    if (model_points.size() != empirical_points.size() || model_points.size() < 2)
        throw std::invalid_argument("calibration_slope: need >= 2 paired points");
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < model_points.size(); ++i) {
        sxx += empirical_points[i] * empirical_points[i];
        sxy += empirical_points[i] * model_points[i];
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

std::vector<double> decile_times(const std::vector<double>& times,
                                 const std::vector<std::uint8_t>& events) {
    std::vector<double> obs;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (events[i]) obs.push_back(times[i]);
    if (obs.empty()) obs = times;
    std::sort(obs.begin(), obs.end());
    std::vector<double> out;
    for (int q = 1; q <= 9; ++q) {
        const double pos = q / 10.0 * static_cast<double>(obs.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        const double v = lo + 1 < obs.size() ? obs[lo] * (1.0 - frac) + obs[lo + 1] * frac : obs[lo];
        if (out.empty() || v > out.back()) out.push_back(v);
    }
    return out;
}

}  // namespace sca
