#pragma once

#include <string>
#include <vector>

#include "tsgap/dataset.hpp"
#include "tsgap/forest.hpp"
#include "tsgap/imputation.hpp"
#include "tsgap/missingness.hpp"

namespace tsgap {

// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double value);

enum class DatasetFormat { ucr_tsv, csv_long };
DatasetFormat dataset_format_from_string(const std::string& name);

// UCR archive convention: one instance per line, first column the class
// label, remaining T columns values; tab or comma separated; NaN = missing.
TimeSeriesDataset read_ucr_tsv(const std::string& path);

// Long format: header `instance,label,feature,time,value`, NaN for missing;
// supports p > 1.
TimeSeriesDataset read_csv_long(const std::string& path);

TimeSeriesDataset read_dataset(const std::string& path, DatasetFormat format);
void write_dataset(const TimeSeriesDataset& dataset, const std::string& path, DatasetFormat format);

void write_removal_log(const std::vector<Removal>& log, const std::string& path);
std::vector<Removal> read_removal_log(const std::string& path);

void write_proximity_csv(const ProximityMatrix& prox, const std::string& path);

// ---- benchmark configuration (config JSON schema v1) -----------------------

struct BenchmarkConfig {
    std::vector<std::string> datasets;   // names resolved against data_dir
    std::string data_dir;                // default: $TSGAP_DATA_DIR or "."
    std::vector<std::string> mechanisms; // MCAR / MAR / MNAR
    std::vector<double> rates;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;

    bool standardize = true;
    double test_fraction = 0.3;          // used when no *_TEST file exists
    int corruption_lag = 1;
    double threshold_percentile = 0.75;
    bool global_threshold = false;

    ImputerConfig imputer;               // per-method knobs
    ForestParams classifier_forest;      // post-imputation RF
    int classifier_knn_k = 1;
};

BenchmarkConfig read_config(const std::string& path);
// Standalone imputer settings file, same shape as the config's "imputers" key.
ImputerConfig read_imputer_config(const std::string& path);
void write_config(const BenchmarkConfig& config, const std::string& path);

std::string default_data_dir();

}  // namespace tsgap
