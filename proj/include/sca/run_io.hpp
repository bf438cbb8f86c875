#pragma once

#include <string>

#include "sca/metrics.hpp"
#include "sca/trainer.hpp"

namespace sca {

// Config file is JSON mirroring TrainConfig; unknown or ill-typed fields are
// ConfigErrors naming the field.
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& config);

// Full evaluation battery on one batch: S=200 sampled times per individual
// for the distribution-based metrics.
MetricsReport compute_metrics(SurvivalModel& model, const MixtureState& mixture,
                              const Batch& batch, std::uint64_t noise_seed,
                              std::size_t s_draws = 200);

std::string metrics_to_json(const MetricsReport& report);

void write_train_record_csv(const std::string& path, const TrainRecord& record);

void write_manifest(const std::string& path, const TrainConfig& config,
                    std::uint64_t dataset_fingerprint, const std::string& checkpoint_path,
                    const std::string& record_path, double best_val_loss, double best_gamma0);

void write_assignments_csv(const std::string& path, const std::vector<std::size_t>& ids,
                           const std::vector<std::size_t>& clusters, const Tensor2& q_rows);

void write_curve_csv(const std::string& path, const SurvivalCurve& curve);

void write_calibration_csv(const std::string& path, const std::vector<double>& times,
                           const std::vector<double>& empirical,
                           const std::vector<double>& model_curve,
                           const std::vector<double>& lower, const std::vector<double>& upper,
                           double slope);

}  // namespace sca
