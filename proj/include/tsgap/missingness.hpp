#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsgap/dataset.hpp"

namespace tsgap {

enum class Mechanism { MCAR, MAR, MNAR };

Mechanism mechanism_from_string(const std::string& name);
std::string to_string(Mechanism mechanism);

struct CorruptionSpec {
    Mechanism mechanism = Mechanism::MCAR;
    double rate = 0.25;
    int lag = 1;                          // MAR only
    double threshold_percentile = 0.75;   // MAR/MNAR
    std::optional<double> removal_probability;  // default: calibrated toward rate
    bool global_threshold = false;        // per-series thresholds by default
    std::uint64_t seed = 0;
};

struct Removal {
    std::size_t instance = 0;
    std::size_t feature = 0;
    std::size_t time = 0;
    double value = 0.0;  // the removed true value
};

struct CorruptionResult {
    TimeSeriesDataset data;
    std::vector<Removal> log;
    std::vector<std::string> notes;  // keep-one skips, calibration, shortfalls
    double realized_rate = 0.0;
    // thresholds actually used, one per (instance, feature); empty for MCAR
    std::vector<double> thresholds;
};

CorruptionResult apply_corruption(const TimeSeriesDataset& dataset, const CorruptionSpec& spec);

// Re-inserts logged values; exact inverse of apply_corruption.
TimeSeriesDataset restore_removals(const TimeSeriesDataset& corrupted, const std::vector<Removal>& log);

double percentile_linear(std::vector<double> values, double q);

}  // namespace tsgap
