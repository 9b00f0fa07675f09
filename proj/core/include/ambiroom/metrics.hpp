#pragma once

#include <array>
#include <string>
#include <vector>

namespace ambiroom {

using BandMatrix = std::vector<std::array<double, 10>>;  // [N samples][10 bands]

// Mean absolute error per band.
std::array<double, 10> mae_per_band(const BandMatrix& preds, const BandMatrix& targets);

// Proportion of variance, implemented as the coefficient of
// determination 1 - SS_res / SS_tot per band. Zero target variance
// yields NaN (flagged by the caller).
std::array<double, 10> pov_per_band(const BandMatrix& preds, const BandMatrix& targets);

// Pearson correlation per band; NaN when either series is constant.
std::array<double, 10> pcc_per_band(const BandMatrix& preds, const BandMatrix& targets);

struct MetricGroup {
    std::string parameter;  // t60 | log_t60 | drr | c50
    int n = 0;
    std::array<double, 10> mae{};
    std::array<double, 10> pov{};
    std::array<double, 10> pcc{};
    std::array<double, 10> baseline_mae{};  // predict-the-train-mean baseline
};

struct EvalReport {
    int schema_version = 1;
    std::string model_id;
    std::string dataset_hash;
    std::vector<MetricGroup> groups;

    std::string to_json() const;
    // One row per (parameter, band, metric); stable, versioned layout.
    std::string to_csv() const;
};

}  // namespace ambiroom
