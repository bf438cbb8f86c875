#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sca/model.hpp"

namespace sca {

// Product-limit estimate with Greenwood variance at each distinct event time.
struct SurvivalCurve {
    std::vector<double> times;     // sorted distinct event times
    std::vector<double> survival;
    std::vector<double> variance;  // Greenwood

    // Step-function evaluation; 1 before the first event time.
    double at(double t) const;
};

struct MetricsReport {
    std::optional<double> c_index;
    std::optional<double> rae_uncensored;
    std::optional<double> rae_censored;
    double mean_cov = 0.0;
    std::optional<double> calibration_slope;
    std::optional<double> logrank_score;  // empty: fewer than 2 non-empty clusters
    std::size_t effective_k = 0;
};

SurvivalCurve kaplan_meier(const std::vector<double>& times,
                           const std::vector<std::uint8_t>& events);

struct SurvivalGroup {
    std::vector<double> times;
    std::vector<std::uint8_t> events;
};

// Two-sample logrank chi-square statistic.
double logrank_pair(const SurvivalGroup& a, const SurvivalGroup& b);

// Sum of pairwise statistics over non-empty clusters; empty when fewer than
// two clusters are populated.
std::optional<double> logrank_score(const std::vector<std::size_t>& assignments,
                                    const std::vector<double>& times,
                                    const std::vector<std::uint8_t>& events);

// Harrell's C: pairs (i,j) with t_i < t_j and l_i = 1; ties in prediction
// count one half.
std::optional<double> c_index(const std::vector<double>& predicted,
                              const std::vector<double>& times,
                              const std::vector<std::uint8_t>& events);

struct RaePair {
    std::optional<double> uncensored;
    std::optional<double> censored;
};

// Clipped relative error for events, hinged for censored observations.
RaePair rae(const std::vector<double>& predicted, const std::vector<double>& times,
            const std::vector<std::uint8_t>& events);

double mean_cov(const EventSampleSet& samples);

// Intercept-free least squares of model vs empirical survival pairs.
std::optional<double> calibration_slope(const std::vector<double>& model_points,
                                        const std::vector<double>& empirical_points);

// Pairs taken at the deciles of the observed event times.
std::vector<double> decile_times(const std::vector<double>& times,
                                 const std::vector<std::uint8_t>& events);

}  // namespace sca
