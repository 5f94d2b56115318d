#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsgap/dataset.hpp"
#include "tsgap/forest.hpp"
#include "tsgap/transforms.hpp"

namespace tsgap {

// Common interface: fit on labeled training data, then impute test data
// without ever reading test labels. Unsupervised baselines apply the same
// procedure to whichever dataset they are handed.
class Imputer {
public:
    virtual ~Imputer() = default;
    virtual std::string name() const = 0;
    virtual TimeSeriesDataset fit_transform(const TimeSeriesDataset& train) = 0;
    virtual TimeSeriesDataset transform(const TimeSeriesDataset& test) const = 0;
    virtual const std::vector<std::string>& log() const = 0;
};

struct BaselineConfig {
    double constant_value = 0.0;
    int knn_k = 5;
    std::optional<std::size_t> dtw_band;
    int rolling_window = 3;
};

struct GapConfig {
    std::string init_strategy = "timewise_mean";  // timewise_mean | timewise_median | knn
    bool init_by_label = true;
    int init_knn_k = 5;
    TransformKind transform = TransformKind::raw;
    std::size_t kernel_count = 500;
    ForestParams forest;  // 200 trees by default
    int max_iters = 5;
    std::string internal_metric = "r2_f1";  // r2_f1 | rmse | mae | accuracy
    bool renormalize_weights = true;        // false = literal unrenormalized donor sum
    bool update_observed = true;            // carry pseudo-missing updates into the next pass
};

struct ImputerConfig {
    BaselineConfig baseline;
    GapConfig gap;
};

std::vector<std::string> imputer_registry();
std::unique_ptr<Imputer> make_imputer(const std::string& method, const ImputerConfig& config);

// ---- entry-level rules (shared by train and test paths) -------------------

// Proximity-weighted average over donors observed at the target slot. By
// default weights are renormalized over available donors; the literal form
// uses them as-is. nullopt signals no usable donor (fallback required).
std::optional<double> impute_continuous_entry(std::span<const std::pair<int, double>> prox_row,
                                              const std::vector<double>& donor_values,
                                              const std::vector<std::uint8_t>& donor_observed,
                                              bool renormalize = true);

// Weighted majority vote; ties break to the lowest class index.
std::optional<int> impute_categorical_entry(std::span<const std::pair<int, double>> prox_row,
                                            const std::vector<int>& donor_classes,
                                            const std::vector<std::uint8_t>& donor_observed,
                                            int class_count);

// ---- initialization --------------------------------------------------------

enum class InitStrategy { timewise_mean, timewise_median, knn };
InitStrategy init_strategy_from_string(const std::string& name);

TimeSeriesDataset initial_impute(const TimeSeriesDataset& dataset, InitStrategy strategy, bool by_label,
                                 int knn_k, std::vector<std::string>* log = nullptr);

// ---- GAP imputer ------------------------------------------------------------

struct IterationDiagnostics {
    int iteration = 0;
    std::vector<double> per_feature;  // higher is better (error metrics are negated)
    double aggregate = 0.0;
};

class GapImputer : public Imputer {
public:
    explicit GapImputer(GapConfig config) : cfg_(std::move(config)) {}

    std::string name() const override;
    TimeSeriesDataset fit_transform(const TimeSeriesDataset& train) override;
    TimeSeriesDataset transform(const TimeSeriesDataset& test) const override;
    const std::vector<std::string>& log() const override { return log_; }

    const std::vector<IterationDiagnostics>& diagnostics() const { return diags_; }
    int best_iteration() const { return best_iter_; }
    const Forest& forest() const { return forest_; }
    const GapConfig& config() const { return cfg_; }
    bool fitted() const { return fitted_; }

    // Directory-bundle persistence: config, transform state, forest, and the
    // training reference needed for test-time donors.
    void save(const std::string& dir) const;
    static std::unique_ptr<GapImputer> load(const std::string& dir);

private:
    GapConfig cfg_;
    bool fitted_ = false;
    Transform transform_;
    Forest forest_;                 // best iteration's forest
    TimeSeriesDataset train_ref_;   // training data as given (mask authoritative)
    RowMatrix train_column_stats_;  // p x T time-wise means over observed entries
    std::vector<IterationDiagnostics> diags_;
    int best_iter_ = 0;
    std::vector<std::string> log_;

    friend struct GapImputerAccess;
};

// ---- baselines --------------------------------------------------------------

enum class BaselineMethod { mean, median, mode, constant, locf, nocb, linear, spline, rolling, knn, knn_dtw };

class BaselineImputer : public Imputer {
public:
    BaselineImputer(BaselineMethod method, BaselineConfig config)
        : method_(method), cfg_(std::move(config)) {}

    std::string name() const override;
    TimeSeriesDataset fit_transform(const TimeSeriesDataset& train) override { return impute(train); }
    TimeSeriesDataset transform(const TimeSeriesDataset& test) const override { return impute(test); }
    const std::vector<std::string>& log() const override { return log_; }

    TimeSeriesDataset impute(const TimeSeriesDataset& dataset) const;

private:
    BaselineMethod method_;
    BaselineConfig cfg_;
    mutable std::vector<std::string> log_;
};

// Natural cubic spline through (xs, ys), evaluated at x; flat beyond the
// observed range, linear when fewer than 4 points.
double natural_cubic_interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x);

}  // namespace tsgap
