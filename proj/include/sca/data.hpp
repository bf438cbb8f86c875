#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sca/losses.hpp"
#include "sca/rng.hpp"
#include "sca/tensor.hpp"

namespace sca {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ColumnKind { Continuous, Categorical };

// Schema sidecar naming the time/event columns and which covariates are
// categorical; everything else is treated as continuous.
struct Schema {
    std::string time_column;
    std::string event_column;
    std::vector<std::string> categorical;
    std::vector<std::string> drop;

    static Schema from_json_file(const std::string& path);
};

struct RawTable {
    std::vector<std::string> columns;
    std::vector<ColumnKind> kinds;           // covariate columns only
    std::vector<std::vector<std::string>> cells;  // covariates, "" = missing
    std::vector<double> time;
    std::vector<std::uint8_t> event;

    std::size_t n_rows() const { return time.size(); }
};

RawTable load_csv(const std::string& path, const Schema& schema);

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

// How each covariate column maps into the feature matrix; enough to replay
// the transform on unseen rows bit for bit.
struct ColumnTransform {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    double impute_value = 0.0;             // continuous: training median
    double mean = 0.0, stddev = 1.0;       // training-split z-score stats
    std::string impute_category;           // categorical: training mode
    std::vector<std::string> categories;   // one-hot order
};

struct Dataset {
    Tensor2 x;
    std::vector<double> t;
    std::vector<std::uint8_t> l;
    std::vector<Split> split;
    std::vector<ColumnTransform> manifest;
    std::vector<std::size_t> true_labels;  // synthetic benchmarks only
    std::size_t dropped_rows = 0;          // t <= 0 or missing time/event

    Batch subset(Split s) const;
    std::vector<std::size_t> indices(Split s) const;
};

// 80/10/10 stratified by event proportion; falls back to a plain random
// split when a stratum is too small.
std::vector<Split> split_labels(const std::vector<std::uint8_t>& events, std::uint64_t seed);

// Imputation and scaling statistics come from the training split only.
Dataset preprocess(const RawTable& table, const std::vector<Split>& split);

// Convenience: load + split + preprocess in the standard order.
Dataset build_dataset(const std::string& csv_path, const Schema& schema, std::uint64_t seed);

// Gaussian covariate clusters with Weibull(2, lambda_k) event times,
// lambda geometrically spaced over one decade, ~30% uniform censoring.
Dataset synth_generate(std::size_t n_per_cluster, std::size_t n_clusters, std::uint64_t seed);

// Replays a manifest on one raw covariate row.
std::vector<double> apply_manifest(const std::vector<ColumnTransform>& manifest,
                                   const std::vector<std::string>& raw_row);

std::uint64_t dataset_fingerprint(const Dataset& data);

}  // namespace sca
