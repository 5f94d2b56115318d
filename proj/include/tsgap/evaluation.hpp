#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsgap/io.hpp"
#include "tsgap/metrics.hpp"

namespace tsgap {

// One benchmark grid cell: (dataset, mechanism, rate, method, seed).
struct BenchmarkRecord {
    std::string dataset;
    std::string mechanism;
    double rate = 0.0;
    std::string method;
    std::uint64_t seed = 0;

    double rmse = 0.0;
    double rf_accuracy = 0.0;
    double knn_accuracy = 0.0;
    double best_internal = 0.0;  // GAP only, 0 otherwise
    int best_iteration = 0;      // GAP only

    double corrupt_seconds = 0.0;
    double impute_seconds = 0.0;
    double classify_seconds = 0.0;

    std::string error;  // non-empty when the cell failed

    std::string key() const;
};

struct BenchmarkReport {
    std::vector<BenchmarkRecord> records;

    void sort_canonical();
};

// Rank each dataset's methods (1 = best, ties share the mean rank) and
// average across datasets. Missing cells rank pairwise-complete with a
// warning.
std::map<std::string, double> average_ranks(
    const std::map<std::string, std::map<std::string, double>>& scores_by_method, bool higher_is_better,
    std::vector<std::string>* warnings = nullptr);

// Executes the full grid; cells already present in <out_dir>/records.jsonl are
// skipped when resume is set. Cell failures are recorded, not fatal.
BenchmarkReport run_benchmark(const BenchmarkConfig& config, const std::string& out_dir, int jobs,
                              bool resume, std::function<void(const std::string&)> progress = {});

void write_report_csv(const BenchmarkReport& report, const std::string& path);
void write_report_json(const BenchmarkReport& report, const std::string& path);
BenchmarkReport read_report_csv(const std::string& path);

// Rank tables per (mechanism, rate, metric) from a report; metric is one of
// rmse (lower better), rf_accuracy, knn_accuracy.
struct RankTable {
    std::string mechanism;
    double rate = 0.0;
    std::string metric;
    std::map<std::string, double> mean_rank;  // per method
    std::vector<std::string> warnings;
};
std::vector<RankTable> rank_tables(const BenchmarkReport& report);

std::string render_rank_tables_csv(const std::vector<RankTable>& tables);
std::string render_rank_tables_markdown(const std::vector<RankTable>& tables);

}  // namespace tsgap
