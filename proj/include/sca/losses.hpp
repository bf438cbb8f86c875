#pragma once

#include <cstdint>
#include <vector>

#include "sca/tensor.hpp"

namespace sca {

// One minibatch of triplets (x, t, l): covariates, observed time, event flag
// (l=1 observed event, l=0 censored).
struct Batch {
    Tensor2 x;
    std::vector<double> t;
    std::vector<std::uint8_t> l;

    void validate() const;
};

// Strictly increasing distinct observed times.
struct TimeGrid {
    std::vector<double> points;

    static TimeGrid from_times(const std::vector<double>& times);
};

struct LossWithGrad {
    double value = 0.0;
    std::vector<double> grad;  // w.r.t. the generated times
};

// Hinge on censored individuals plus L1 on observed ones, each averaged over
// its own subset.
LossWithGrad accuracy_loss(const std::vector<double>& t, const std::vector<std::uint8_t>& l,
                           const std::vector<double>& generated);

// Point-estimate Kaplan-Meier over the grid. Events are counted per interval
// (t_{i-1}, t_i]; the risk set for interval i holds everyone past t_{i-1}
// except observations censored strictly inside the interval. With the grid
// taken at the distinct observed times this reproduces the product-limit
// estimator exactly.
std::vector<double> pkm_curve(const std::vector<double>& times,
                              const std::vector<std::uint8_t>& events, const TimeGrid& grid);

// Mean absolute gap between the data PKM curve and the model-sample PKM
// curve. The model curve treats every generated time as an event. When
// `temperature` > 0, the model curve uses a sigmoid-smoothed step so the
// gradient w.r.t. the generated times is defined; temperature <= 0 selects
// the exact step (no gradient; grad empty).
LossWithGrad calibration_loss(const Batch& batch, const std::vector<double>& generated,
                              const TimeGrid& grid, double temperature);

// tau = 0.1 * median inter-event gap of the grid.
double default_temperature(const TimeGrid& grid);

double total_loss(double clustering, double accuracy, double calibration, double lambda2 = 1.0,
                  double lambda3 = 1.0);

}  // namespace sca
