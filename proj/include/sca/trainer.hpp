#pragma once

#include <cstdint>
#include <vector>

#include "sca/data.hpp"
#include "sca/dpmix.hpp"
#include "sca/errors.hpp"
#include "sca/model.hpp"

namespace sca {

struct TrainConfig {
    std::size_t truncation = 25;                    // K
    std::vector<double> gamma0_grid = {2, 3, 4, 8};
    double gamma0 = 3.0;
    double eta = 0.9;
    double nu = 1.0;
    std::size_t batch_size = 350;                   // clamped to the training-set size
    double lr = 3e-4;
    std::size_t max_epochs = 300;
    std::size_t patience = 20;
    std::size_t pretrain_epochs = 30;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    std::uint64_t seed = 1;

    std::size_t hidden_dim = 50;
    std::size_t latent_dim = 50;
    std::size_t noise_dim = 50;
    NoiseKind noise_kind = NoiseKind::Uniform;
    double dropout = 0.2;

    void validate() const;  // throws ConfigError naming the bad field
};

struct EpochRecord {
    std::size_t epoch = 0;
    bool joint = false;  // false during pretraining
    double loss_dp = 0.0, loss_acc = 0.0, loss_cal = 0.0, loss_total = 0.0;
    double val_total = 0.0;
    std::size_t effective_k = 0;
    double wall_seconds = 0.0;
};

struct TrainRecord {
    std::vector<EpochRecord> epochs;
};

struct KMeansResult {
    Tensor2 centroids;
    std::vector<std::size_t> labels;
};

// Lloyd's algorithm with k-means++ seeding; empty clusters reseed to the
// farthest point.
KMeansResult kmeans(const Tensor2& points, std::size_t k, std::uint64_t seed);

struct FitResult {
    SurvivalModel model;
    MixtureState mixture;
    TrainRecord record;
    double best_val_loss = 0.0;
};

// Accuracy+calibration only; the clustering objective is excluded. Appends
// one EpochRecord per epoch when `record` is given.
void pretrain(SurvivalModel& model, const TrainConfig& config, const Dataset& data,
              TrainRecord* record = nullptr);

// Full procedure: pretrain, K-means centroid init, joint optimization with
// online proportion updates, early stopping on validation total loss.
FitResult fit(const TrainConfig& config, const Dataset& data);

struct GridSearchResult {
    double best_gamma0 = 0.0;
    FitResult best;
    std::vector<std::pair<double, double>> candidates;  // (gamma0, val loss)
};

GridSearchResult grid_search(const TrainConfig& config, const Dataset& data);

// Validation-style total loss of a fitted model on one split, exact step
// function, single deterministic noise draw.
double evaluate_total_loss(SurvivalModel& model, const MixtureState& mixture,
                           const TrainConfig& config, const Batch& batch, std::uint64_t noise_seed);

}  // namespace sca
