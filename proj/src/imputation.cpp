#include "tsgap/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "json.hpp"
#include "tsgap/dtw.hpp"
#include "tsgap/metrics.hpp"

namespace tsgap {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void append_log(std::vector<std::string>* log, std::string msg) {
    if (log) log->push_back(std::move(msg));
}

double observed_series_mean(const TimeSeriesDataset& d, std::size_t n, std::size_t j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < d.series_length(); ++t)
        if (!d.is_missing(n, j, t)) {
            sum += d.value(n, j, t);
            ++count;
        }
    return count == 0 ? kNaN : sum / static_cast<double>(count);
}

enum class ColumnStat { mean, median, mode };

// Statistic of column (j,t) over observed instances, optionally restricted to
// one label. NaN when the pool is empty.
double column_statistic(const TimeSeriesDataset& d, std::size_t j, std::size_t t, ColumnStat stat,
                        std::optional<int> label) {
    std::vector<double> pool;
    for (std::size_t n = 0; n < d.num_instances(); ++n) {
        if (label && d.labels[n] != *label) continue;
        if (!d.is_missing(n, j, t)) pool.push_back(d.value(n, j, t));
    }
    if (pool.empty()) return kNaN;
    switch (stat) {
        case ColumnStat::mean:
            return std::accumulate(pool.begin(), pool.end(), 0.0) / static_cast<double>(pool.size());
        case ColumnStat::median: {
            std::sort(pool.begin(), pool.end());
            const std::size_t mid = pool.size() / 2;
            return pool.size() % 2 == 1 ? pool[mid] : 0.5 * (pool[mid - 1] + pool[mid]);
        }
        case ColumnStat::mode: {
            std::map<double, std::size_t> counts;
            for (double v : pool) ++counts[v];
            double best = pool[0];
            std::size_t best_count = 0;
            for (const auto& [v, c] : counts)
                if (c > best_count) {  // map order breaks ties toward the smallest value
                    best = v;
                    best_count = c;
                }
            return best;
        }
    }
    return kNaN;
}

// Fallback chain shared by the time-wise fills: label column -> global column
// -> instance mean.
double timewise_fill_value(const TimeSeriesDataset& d, std::size_t n, std::size_t j, std::size_t t,
                           ColumnStat stat, bool by_label, std::vector<std::string>* log) {
    if (by_label) {
        const double v = column_statistic(d, j, t, stat, d.labels[n]);
        if (!std::isnan(v)) return v;
        append_log(log, "fallback: label column (" + std::to_string(j) + "," + std::to_string(t) +
                            ") empty for label " + std::to_string(d.labels[n]) + ", using global column");
    }
    const double v = column_statistic(d, j, t, stat, std::nullopt);
    if (!std::isnan(v)) return v;
    append_log(log, "fallback: column (" + std::to_string(j) + "," + std::to_string(t) +
                        ") globally empty, using instance mean");
    const double im = observed_series_mean(d, n, j);
    if (!std::isnan(im)) return im;
    append_log(log, "fallback: instance (" + std::to_string(n) + "," + std::to_string(j) +
                        ") has no observed values, using 0");
    return 0.0;
}

// Distance over commonly observed time points, normalized by overlap size.
double overlap_distance(const TimeSeriesDataset& d, std::size_t a, std::size_t b, std::size_t j) {
    double ss = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < d.series_length(); ++t)
        if (!d.is_missing(a, j, t) && !d.is_missing(b, j, t)) {
            const double diff = d.value(a, j, t) - d.value(b, j, t);
            ss += diff * diff;
            ++count;
        }
    if (count == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(ss / static_cast<double>(count));
}

std::vector<double> observed_subsequence(const TimeSeriesDataset& d, std::size_t n, std::size_t j) {
    std::vector<double> out;
    for (std::size_t t = 0; t < d.series_length(); ++t)
        if (!d.is_missing(n, j, t)) out.push_back(d.value(n, j, t));
    return out;
}

}  // namespace

// ---- entry-level rules -----------------------------------------------------

std::optional<double> impute_continuous_entry(std::span<const std::pair<int, double>> prox_row,
                                              const std::vector<double>& donor_values,
                                              const std::vector<std::uint8_t>& donor_observed,
                                              bool renormalize) {
    double weight_sum = 0.0, acc = 0.0;
    for (const auto& [k, w] : prox_row) {
        if (w <= 0.0 || !donor_observed[static_cast<std::size_t>(k)]) continue;
        weight_sum += w;
        acc += w * donor_values[static_cast<std::size_t>(k)];
    }
    if (weight_sum <= 0.0) return std::nullopt;
    return renormalize ? acc / weight_sum : acc;
}

std::optional<int> impute_categorical_entry(std::span<const std::pair<int, double>> prox_row,
                                            const std::vector<int>& donor_classes,
                                            const std::vector<std::uint8_t>& donor_observed,
                                            int class_count) {
    std::vector<double> votes(static_cast<std::size_t>(class_count), 0.0);
    bool any = false;
    for (const auto& [k, w] : prox_row) {
        if (w <= 0.0 || !donor_observed[static_cast<std::size_t>(k)]) continue;
        votes[static_cast<std::size_t>(donor_classes[static_cast<std::size_t>(k)])] += w;
        any = true;
    }
    if (!any) return std::nullopt;
    int best = 0;
    for (int c = 1; c < class_count; ++c)
        if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    return best;
}

// ---- initialization ----------------------------------------------------------

InitStrategy init_strategy_from_string(const std::string& name) {
    if (name == "timewise_mean") return InitStrategy::timewise_mean;
    if (name == "timewise_median") return InitStrategy::timewise_median;
    if (name == "knn") return InitStrategy::knn;
    throw UsageError("unknown init strategy: " + name);
}

namespace {

TimeSeriesDataset knn_fill(const TimeSeriesDataset& dataset, int k, bool use_dtw,
                           std::optional<std::size_t> band, std::vector<std::string>* log);

}  // namespace

TimeSeriesDataset initial_impute(const TimeSeriesDataset& dataset, InitStrategy strategy, bool by_label,
                                 int knn_k, std::vector<std::string>* log) {
    if (strategy == InitStrategy::knn) return knn_fill(dataset, knn_k, false, std::nullopt, log);
    const ColumnStat stat = strategy == InitStrategy::timewise_mean ? ColumnStat::mean : ColumnStat::median;
    TimeSeriesDataset out = dataset;
    for (std::size_t n = 0; n < dataset.num_instances(); ++n)
        for (std::size_t j = 0; j < dataset.num_features(); ++j)
            for (std::size_t t = 0; t < dataset.series_length(); ++t)
                if (dataset.is_missing(n, j, t)) {
                    const ColumnStat s = dataset.schema.is_categorical(j) ? ColumnStat::mode : stat;
                    out.set_value(n, j, t, timewise_fill_value(dataset, n, j, t, s, by_label, log));
                    out.set_missing(n, j, t, false);
                }
    return out;
}

// ---- baselines ---------------------------------------------------------------

namespace {

TimeSeriesDataset timewise_fill(const TimeSeriesDataset& dataset, ColumnStat stat,
                                std::vector<std::string>* log) {
    TimeSeriesDataset out = dataset;
    for (std::size_t n = 0; n < dataset.num_instances(); ++n)
        for (std::size_t j = 0; j < dataset.num_features(); ++j)
            for (std::size_t t = 0; t < dataset.series_length(); ++t)
                if (dataset.is_missing(n, j, t)) {
                    const ColumnStat s = dataset.schema.is_categorical(j) ? ColumnStat::mode : stat;
                    out.set_value(n, j, t, timewise_fill_value(dataset, n, j, t, s, false, log));
                    out.set_missing(n, j, t, false);
                }
    return out;
}

TimeSeriesDataset constant_fill(const TimeSeriesDataset& dataset, double value) {
    TimeSeriesDataset out = dataset;
    for (std::size_t n = 0; n < dataset.num_instances(); ++n)
        for (std::size_t j = 0; j < dataset.num_features(); ++j)
            for (std::size_t t = 0; t < dataset.series_length(); ++t)
                if (dataset.is_missing(n, j, t)) {
                    out.set_value(n, j, t, value);
                    out.set_missing(n, j, t, false);
                }
    return out;
}

// Fills one series via carry rules; returns false when nothing is observed.
bool carry_fill(std::vector<double>& values, const std::vector<std::uint8_t>& missing, bool forward) {
    const std::size_t T = values.size();
    bool any = false;
    for (std::size_t t = 0; t < T; ++t) any = any || !missing[t];
    if (!any) return false;
    if (forward) {  // LOCF: leading gap backfilled from the first observed value
        std::size_t first = 0;
        while (missing[first]) ++first;
        double carry = values[first];
        for (std::size_t t = 0; t < T; ++t) {
            if (!missing[t]) carry = values[t];
            else values[t] = carry;
        }
    } else {  // NOCB: trailing gap forward-filled from the last observed value
        std::size_t last = T - 1;
        while (missing[last]) --last;
        double carry = values[last];
        for (std::size_t t = T; t-- > 0;) {
            if (!missing[t]) carry = values[t];
            else values[t] = carry;
        }
    }
    return true;
}

void fill_series_with_column_means(const TimeSeriesDataset& dataset, TimeSeriesDataset& out,
                                   std::size_t n, std::size_t j, std::vector<std::string>* log) {
    append_log(log, "series (" + std::to_string(n) + "," + std::to_string(j) +
                        ") has no observed values; filled with global column means");
    for (std::size_t t = 0; t < dataset.series_length(); ++t)
        if (dataset.is_missing(n, j, t)) {
            out.set_value(n, j, t, timewise_fill_value(dataset, n, j, t, ColumnStat::mean, false, log));
            out.set_missing(n, j, t, false);
        }
}

TimeSeriesDataset per_series_fill(const TimeSeriesDataset& dataset, BaselineMethod method,
                                  const BaselineConfig& cfg, std::vector<std::string>* log) {
    TimeSeriesDataset out = dataset;
    const std::size_t T = dataset.series_length();
    std::vector<double> values(T);
    std::vector<std::uint8_t> missing(T);
    for (std::size_t n = 0; n < dataset.num_instances(); ++n)
        for (std::size_t j = 0; j < dataset.num_features(); ++j) {
            bool any_missing = false, any_observed = false;
            for (std::size_t t = 0; t < T; ++t) {
                missing[t] = dataset.is_missing(n, j, t) ? 1 : 0;
                values[t] = missing[t] ? 0.0 : dataset.value(n, j, t);
                any_missing = any_missing || missing[t];
                any_observed = any_observed || !missing[t];
            }
            if (!any_missing) continue;
            if (!any_observed) {
                fill_series_with_column_means(dataset, out, n, j, log);
                continue;
            }
            if (method == BaselineMethod::locf || method == BaselineMethod::nocb) {
                carry_fill(values, missing, method == BaselineMethod::locf);
            } else if (method == BaselineMethod::linear || method == BaselineMethod::spline) {
                std::vector<double> xs, ys;
                for (std::size_t t = 0; t < T; ++t)
                    if (!missing[t]) {
                        xs.push_back(static_cast<double>(t));
                        ys.push_back(values[t]);
                    }
                for (std::size_t t = 0; t < T; ++t) {
                    if (!missing[t]) continue;
                    const double x = static_cast<double>(t);
                    if (method == BaselineMethod::spline && xs.size() >= 4) {
                        values[t] = natural_cubic_interpolate(xs, ys, x);
                    } else {
                        // linear with flat extrapolation
                        if (x <= xs.front()) values[t] = ys.front();
                        else if (x >= xs.back()) values[t] = ys.back();
                        else {
                            const auto it = std::upper_bound(xs.begin(), xs.end(), x);
                            const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
                            const double frac = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
                            values[t] = ys[hi - 1] + frac * (ys[hi] - ys[hi - 1]);
                        }
                    }
                }
            } else {  // rolling: centered window of observed values, shrinking at edges
                // window is the total width of the centered window; an even
                // width takes the extra point from the past
                const int w = std::max(1, cfg.rolling_window);
                const std::size_t back = static_cast<std::size_t>(w / 2);
                const std::size_t fwd = static_cast<std::size_t>((w - 1) / 2);
                for (std::size_t t = 0; t < T; ++t) {
                    if (!missing[t]) continue;
                    double sum = 0.0;
                    std::size_t count = 0;
                    const std::size_t lo = t >= back ? t - back : 0;
                    const std::size_t hi = std::min(T - 1, t + fwd);
                    for (std::size_t s = lo; s <= hi; ++s)
                        if (!missing[s]) {
                            sum += values[s];
                            ++count;
                        }
                    if (count > 0) {
                        values[t] = sum / static_cast<double>(count);
                    } else {
                        values[t] = observed_series_mean(dataset, n, j);
                        append_log(log, "rolling: empty window at (" + std::to_string(n) + "," +
                                            std::to_string(j) + "," + std::to_string(t) +
                                            "), used series mean");
                    }
                }
            }
            for (std::size_t t = 0; t < T; ++t)
                if (missing[t]) {
                    out.set_value(n, j, t, values[t]);
                    out.set_missing(n, j, t, false);
                }
        }
    return out;
}

TimeSeriesDataset knn_fill(const TimeSeriesDataset& dataset, int k, bool use_dtw,
                           std::optional<std::size_t> band, std::vector<std::string>* log) {
    if (k < 1) throw UsageError("knn imputation: k must be >= 1");
    TimeSeriesDataset out = dataset;
    const std::size_t N = dataset.num_instances(), T = dataset.series_length();
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t j = 0; j < dataset.num_features(); ++j) {
        std::vector<std::vector<double>> subseq;
        if (use_dtw) {
            subseq.resize(N);
            for (std::size_t n = 0; n < N; ++n) subseq[n] = observed_subsequence(dataset, n, j);
        }
        for (std::size_t n = 0; n < N; ++n) {
            bool any_missing = false;
            for (std::size_t t = 0; t < T && !any_missing; ++t) any_missing = dataset.is_missing(n, j, t);
            if (!any_missing) continue;

            dist.clear();
            for (std::size_t m = 0; m < N; ++m) {
                if (m == n) continue;
                double d;
                if (use_dtw) {
                    if (subseq[n].empty() || subseq[m].empty()) continue;
                    d = dtw_distance(subseq[n], subseq[m], band);
                } else {
                    d = overlap_distance(dataset, n, m, j);
                    if (!std::isfinite(d)) continue;
                }
                dist.emplace_back(d, m);
            }
            std::sort(dist.begin(), dist.end());

            const bool categorical = dataset.schema.is_categorical(j);
            for (std::size_t t = 0; t < T; ++t) {
                if (!dataset.is_missing(n, j, t)) continue;
                std::vector<double> donor_values;
                for (const auto& [d, m] : dist) {
                    if (dataset.is_missing(m, j, t)) continue;
                    donor_values.push_back(dataset.value(m, j, t));
                    if (static_cast<int>(donor_values.size()) == k) break;
                }
                double fill;
                if (donor_values.empty()) {
                    append_log(log, "knn: no comparable donor at (" + std::to_string(n) + "," +
                                        std::to_string(j) + "," + std::to_string(t) +
                                        "), used time-wise mean");
                    fill = timewise_fill_value(dataset, n, j, t,
                                               categorical ? ColumnStat::mode : ColumnStat::mean, false, log);
                } else if (categorical) {
                    std::map<double, std::size_t> votes;
                    for (double v : donor_values) ++votes[v];
                    fill = donor_values[0];
                    std::size_t best = 0;
                    for (const auto& [v, c] : votes)
                        if (c > best) {
                            fill = v;
                            best = c;
                        }
                } else {
                    fill = std::accumulate(donor_values.begin(), donor_values.end(), 0.0) /
                           static_cast<double>(donor_values.size());
                }
                out.set_value(n, j, t, fill);
                out.set_missing(n, j, t, false);
            }
        }
    }
    return out;
}

}  // namespace

double natural_cubic_interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    const std::size_t n = xs.size();
    if (n < 2) throw DataError("spline: need at least 2 points");
    if (x <= xs.front()) return ys.front();  // flat extrapolation
    if (x >= xs.back()) return ys.back();
    if (n < 4) {  // linear fallback
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
        const double frac = (x - xs[hi - 1]) / (xs[hi] - xs[hi - 1]);
        return ys[hi - 1] + frac * (ys[hi] - ys[hi - 1]);
    }
    // second derivatives via the tridiagonal natural-spline system
    std::vector<double> h(n - 1), alpha(n, 0.0), l(n, 1.0), mu(n, 0.0), z(n, 0.0), c(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) h[i] = xs[i + 1] - xs[i];
    for (std::size_t i = 1; i + 1 < n; ++i)
        alpha[i] = 3.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        l[i] = 2.0 * (xs[i + 1] - xs[i - 1]) - h[i - 1] * mu[i - 1];
        mu[i] = h[i] / l[i];
        z[i] = (alpha[i] - h[i - 1] * z[i - 1]) / l[i];
    }
    for (std::size_t i = n - 1; i-- > 0;) c[i] = z[i] - mu[i] * c[i + 1];

    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    const double b = (ys[i + 1] - ys[i]) / h[i] - h[i] * (c[i + 1] + 2.0 * c[i]) / 3.0;
    const double d = (c[i + 1] - c[i]) / (3.0 * h[i]);
    const double dx = x - xs[i];
    return ys[i] + b * dx + c[i] * dx * dx + d * dx * dx * dx;
}

std::string BaselineImputer::name() const {
    switch (method_) {
        case BaselineMethod::mean: return "mean";
        case BaselineMethod::median: return "median";
        case BaselineMethod::mode: return "mode";
        case BaselineMethod::constant: return "constant";
        case BaselineMethod::locf: return "locf";
        case BaselineMethod::nocb: return "nocb";
        case BaselineMethod::linear: return "linear";
        case BaselineMethod::spline: return "spline";
        case BaselineMethod::rolling: return "rolling";
        case BaselineMethod::knn: return "knn";
        case BaselineMethod::knn_dtw: return "knn_dtw";
    }
    return "?";
}

TimeSeriesDataset BaselineImputer::impute(const TimeSeriesDataset& dataset) const {
    switch (method_) {
        case BaselineMethod::mean: return timewise_fill(dataset, ColumnStat::mean, &log_);
        case BaselineMethod::median: return timewise_fill(dataset, ColumnStat::median, &log_);
        case BaselineMethod::mode: return timewise_fill(dataset, ColumnStat::mode, &log_);
        case BaselineMethod::constant: return constant_fill(dataset, cfg_.constant_value);
        case BaselineMethod::locf:
        case BaselineMethod::nocb:
        case BaselineMethod::linear:
        case BaselineMethod::spline:
        case BaselineMethod::rolling: return per_series_fill(dataset, method_, cfg_, &log_);
        case BaselineMethod::knn: return knn_fill(dataset, cfg_.knn_k, false, std::nullopt, &log_);
        case BaselineMethod::knn_dtw: return knn_fill(dataset, cfg_.knn_k, true, cfg_.dtw_band, &log_);
    }
    throw UsageError("unknown baseline method");
}

// ---- GAP imputer -------------------------------------------------------------

namespace {

// Substitute for an undefined proximity row: uniform mass over other
// instances sharing the query's label.
std::vector<std::pair<int, double>> label_uniform_row(const std::vector<int>& labels, std::size_t self,
                                                      int label) {
    std::vector<std::pair<int, double>> row;
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (k != self && labels[k] == label) row.emplace_back(static_cast<int>(k), 1.0);
    if (row.empty())
        for (std::size_t k = 0; k < labels.size(); ++k)
            if (k != self) row.emplace_back(static_cast<int>(k), 1.0);
    const double w = 1.0 / static_cast<double>(row.size());
    for (auto& [k, v] : row) v = w;
    return row;
}

double continuous_feature_score(const std::string& metric, const std::vector<double>& truth,
                                const std::vector<double>& est) {
    if (metric == "rmse") return -root_mean_squared_error(truth, est);
    if (metric == "mae") return -mean_absolute_error(truth, est);
    return r2_score(truth, est);
}

double categorical_feature_score(const std::string& metric, const std::vector<int>& truth,
                                 const std::vector<int>& est, int class_count) {
    if (metric == "accuracy") return accuracy(truth, est);
    return macro_f1(truth, est, class_count);
}

}  // namespace

std::string GapImputer::name() const { return "gap_" + to_string(cfg_.transform); }

TimeSeriesDataset GapImputer::fit_transform(const TimeSeriesDataset& train) {
    train.validate();
    if (train.num_classes < 1) throw DataError("gap imputer: training data must be labeled");
    if (cfg_.max_iters < 1) throw UsageError("gap imputer: max_iters must be >= 1");
    const std::size_t N = train.num_instances(), p = train.num_features(), T = train.series_length();

    train_ref_ = train;
    const InitStrategy strategy = init_strategy_from_string(cfg_.init_strategy);
    TimeSeriesDataset current = initial_impute(train, strategy, cfg_.init_by_label, cfg_.init_knn_k, &log_);
    transform_ = Transform::fit(cfg_.transform, p, T, cfg_.kernel_count, mix_seed(cfg_.forest.seed, "transform"));

    // time-wise training statistics for label-free test initialization
    const ColumnStat test_stat =
        strategy == InitStrategy::timewise_median ? ColumnStat::median : ColumnStat::mean;
    if (strategy == InitStrategy::knn)
        log_.push_back(
            "test initialization uses train-neighbor knn, falling back to time-wise means when no "
            "neighbor is observed");
    train_column_stats_ = RowMatrix(p, T);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t t = 0; t < T; ++t)
            train_column_stats_.at(j, t) =
                column_statistic(train, j, t,
                                 train.schema.is_categorical(j) ? ColumnStat::mode : test_stat, std::nullopt);

    diags_.clear();
    double best_score = -std::numeric_limits<double>::infinity();
    TimeSeriesDataset best_array;
    best_iter_ = 0;

    std::vector<double> donor_values(N);
    std::vector<std::uint8_t> donor_observed(N);
    std::vector<int> donor_classes(N);

    for (int iter = 1; iter <= cfg_.max_iters; ++iter) {
        const RowMatrix features = transform_.apply(current);
        ForestParams fp = cfg_.forest;
        fp.seed = mix_seed(cfg_.forest.seed, static_cast<std::uint64_t>(iter));
        Forest forest = fit_forest(features, train.labels, train.num_classes, fp);
        ProximityMatrix prox = gap_proximities(forest);
        for (std::size_t i = 0; i < N; ++i)
            if (!prox.defined[i]) {
                log_.push_back("iteration " + std::to_string(iter) + ": instance " + std::to_string(i) +
                               " has no OOB trees; substituted label-conditional uniform weights");
                prox.rows[i] = label_uniform_row(train.labels, i, train.labels[i]);
                prox.defined[i] = 1;
            }

        // one full Jacobi pass over every entry, missing and pseudo-missing alike
        TimeSeriesDataset next = current;
        for (std::size_t j = 0; j < p; ++j) {
            const bool categorical = train.schema.is_categorical(j);
            const int class_count = categorical ? static_cast<int>(train.schema.categories[j].size()) : 0;
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t k = 0; k < N; ++k) {
                    donor_observed[k] = train.is_missing(k, j, t) ? 0 : 1;
                    donor_values[k] = donor_observed[k] ? train.value(k, j, t) : 0.0;
                    if (categorical)
                        donor_classes[k] =
                            donor_observed[k] ? static_cast<int>(std::lround(donor_values[k])) : 0;
                }
                for (std::size_t n = 0; n < N; ++n) {
                    std::span<const std::pair<int, double>> row(prox.rows[n]);
                    if (categorical) {
                        const auto v = impute_categorical_entry(row, donor_classes, donor_observed, class_count);
                        double fill;
                        if (v) fill = static_cast<double>(*v);
                        else {
                            fill = timewise_fill_value(train, n, j, t, ColumnStat::mode, true, &log_);
                        }
                        next.set_value(n, j, t, fill);
                    } else {
                        const auto v =
                            impute_continuous_entry(row, donor_values, donor_observed, cfg_.renormalize_weights);
                        double fill;
                        if (v) fill = *v;
                        else {
                            fill = timewise_fill_value(train, n, j, t, ColumnStat::mean, true, &log_);
                        }
                        next.set_value(n, j, t, fill);
                    }
                }
            }
        }

        // score the pass against the true observed values (pseudo-missing check)
        IterationDiagnostics diag;
        diag.iteration = iter;
        for (std::size_t j = 0; j < p; ++j) {
            double score = 0.0;
            if (train.schema.is_categorical(j)) {
                std::vector<int> truth, est;
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t t = 0; t < T; ++t)
                        if (!train.is_missing(n, j, t)) {
                            truth.push_back(static_cast<int>(std::lround(train.value(n, j, t))));
                            est.push_back(static_cast<int>(std::lround(next.value(n, j, t))));
                        }
                if (!truth.empty())
                    score = categorical_feature_score(cfg_.internal_metric, truth, est,
                                                      static_cast<int>(train.schema.categories[j].size()));
            } else {
                std::vector<double> truth, est;
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t t = 0; t < T; ++t)
                        if (!train.is_missing(n, j, t)) {
                            truth.push_back(train.value(n, j, t));
                            est.push_back(next.value(n, j, t));
                        }
                if (!truth.empty()) score = continuous_feature_score(cfg_.internal_metric, truth, est);
            }
            diag.per_feature.push_back(score);
        }
        diag.aggregate = diag.per_feature.empty()
                             ? 0.0
                             : std::accumulate(diag.per_feature.begin(), diag.per_feature.end(), 0.0) /
                                   static_cast<double>(diag.per_feature.size());
        diags_.push_back(diag);

        if (diag.aggregate > best_score) {  // earliest iteration wins ties
            best_score = diag.aggregate;
            best_iter_ = iter;
            best_array = next;
            forest_ = std::move(forest);
        }

        if (cfg_.update_observed) {
            current = next;
        } else {
            current = next;
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t j = 0; j < p; ++j)
                    for (std::size_t t = 0; t < T; ++t)
                        if (!train.is_missing(n, j, t)) current.set_value(n, j, t, train.value(n, j, t));
        }
    }

    // final artifact: true observed values, best-iteration fills at missing slots
    TimeSeriesDataset result = train;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t t = 0; t < T; ++t)
                if (train.is_missing(n, j, t)) {
                    result.set_value(n, j, t, best_array.value(n, j, t));
                    result.set_missing(n, j, t, false);
                }
    fitted_ = true;
    return result;
}

TimeSeriesDataset GapImputer::transform(const TimeSeriesDataset& test) const {
    if (!fitted_) throw DataError("gap imputer: transform before fit");
    const std::size_t p = train_ref_.num_features(), T = train_ref_.series_length();
    if (test.num_features() != p || test.series_length() != T)
        throw DataError("gap imputer: test shape does not match training shape");
    const std::size_t M = test.num_instances(), N = train_ref_.num_instances();

    // label-free initialization with the pipeline's strategy: knn fills from
    // the nearest training rows, the time-wise strategies from stored training
    // column statistics
    TimeSeriesDataset init = test;
    const bool knn_init = init_strategy_from_string(cfg_.init_strategy) == InitStrategy::knn;
    for (std::size_t n = 0; n < M; ++n) {
        std::vector<std::pair<double, std::size_t>> neighbors;
        if (knn_init) {
            for (std::size_t k = 0; k < N; ++k) {
                double ss = 0.0;
                std::size_t overlap = 0;
                for (std::size_t j = 0; j < p; ++j)
                    for (std::size_t t = 0; t < T; ++t) {
                        if (test.is_missing(n, j, t) || train_ref_.is_missing(k, j, t)) continue;
                        const double diff = test.value(n, j, t) - train_ref_.value(k, j, t);
                        ss += diff * diff;
                        ++overlap;
                    }
                if (overlap > 0) neighbors.emplace_back(std::sqrt(ss / static_cast<double>(overlap)), k);
            }
            std::sort(neighbors.begin(), neighbors.end());
        }
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t t = 0; t < T; ++t) {
                if (!test.is_missing(n, j, t)) continue;
                double v = std::numeric_limits<double>::quiet_NaN();
                if (knn_init) {
                    double sum = 0.0;
                    int used = 0;
                    for (const auto& [dist, k] : neighbors) {
                        if (train_ref_.is_missing(k, j, t)) continue;
                        sum += train_ref_.value(k, j, t);
                        if (++used == cfg_.init_knn_k) break;
                    }
                    if (used > 0) v = sum / static_cast<double>(used);
                }
                if (std::isnan(v)) v = train_column_stats_.at(j, t);
                if (std::isnan(v)) v = observed_series_mean(test, n, j);
                if (std::isnan(v)) v = 0.0;
                init.set_value(n, j, t, v);
                init.set_missing(n, j, t, false);
            }
    }

    const RowMatrix features = transform_.apply(init);
    const ProximityMatrix prox = gap_proximities_test(forest_, features);

    TimeSeriesDataset out = test;
    std::vector<double> donor_values(N);
    std::vector<std::uint8_t> donor_observed(N);
    std::vector<int> donor_classes(N);
    for (std::size_t j = 0; j < p; ++j) {
        const bool categorical = train_ref_.schema.is_categorical(j);
        const int class_count = categorical ? static_cast<int>(train_ref_.schema.categories[j].size()) : 0;
        for (std::size_t t = 0; t < T; ++t) {
            bool column_loaded = false;
            for (std::size_t n = 0; n < M; ++n) {
                if (!test.is_missing(n, j, t)) continue;
                if (!column_loaded) {
                    for (std::size_t k = 0; k < N; ++k) {
                        donor_observed[k] = train_ref_.is_missing(k, j, t) ? 0 : 1;
                        donor_values[k] = donor_observed[k] ? train_ref_.value(k, j, t) : 0.0;
                        if (categorical)
                            donor_classes[k] =
                                donor_observed[k] ? static_cast<int>(std::lround(donor_values[k])) : 0;
                    }
                    column_loaded = true;
                }
                std::span<const std::pair<int, double>> row(prox.rows[n]);
                double fill;
                if (categorical) {
                    const auto v = impute_categorical_entry(row, donor_classes, donor_observed, class_count);
                    fill = v ? static_cast<double>(*v)
                             : timewise_fill_value(train_ref_, 0, j, t, ColumnStat::mode, false, nullptr);
                } else {
                    const auto v =
                        impute_continuous_entry(row, donor_values, donor_observed, cfg_.renormalize_weights);
                    fill = v ? *v : timewise_fill_value(train_ref_, 0, j, t, ColumnStat::mean, false, nullptr);
                }
                out.set_value(n, j, t, fill);
                out.set_missing(n, j, t, false);
            }
        }
    }
    return out;
}

// ---- registry ----------------------------------------------------------------

std::vector<std::string> imputer_registry() {
    return {"mean", "median",  "mode",    "constant", "locf",        "nocb",       "linear",
            "spline", "rolling", "knn",   "knn_dtw",  "gap_raw",     "gap_summary", "gap_kernels"};
}

std::unique_ptr<Imputer> make_imputer(const std::string& method, const ImputerConfig& config) {
    static const std::map<std::string, BaselineMethod> baselines = {
        {"mean", BaselineMethod::mean},       {"median", BaselineMethod::median},
        {"mode", BaselineMethod::mode},       {"constant", BaselineMethod::constant},
        {"locf", BaselineMethod::locf},       {"nocb", BaselineMethod::nocb},
        {"linear", BaselineMethod::linear},   {"spline", BaselineMethod::spline},
        {"rolling", BaselineMethod::rolling}, {"knn", BaselineMethod::knn},
        {"knn_dtw", BaselineMethod::knn_dtw}};
    if (const auto it = baselines.find(method); it != baselines.end())
        return std::make_unique<BaselineImputer>(it->second, config.baseline);
    if (method == "gap_raw" || method == "gap_summary" || method == "gap_kernels") {
        GapConfig gc = config.gap;
        gc.transform = transform_kind_from_string(method.substr(4));
        return std::make_unique<GapImputer>(gc);
    }
    std::string known;
    for (const auto& m : imputer_registry()) known += (known.empty() ? "" : ", ") + m;
    throw UsageError("unknown imputation method '" + method + "'; registered methods: " + known);
}

// ---- persistence ---------------------------------------------------------------

namespace {

json dataset_to_json(const TimeSeriesDataset& d) {
    json values = json::array();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const std::size_t n = i / (d.num_features() * d.series_length());
        const std::size_t rem = i % (d.num_features() * d.series_length());
        const std::size_t j = rem / d.series_length();
        const std::size_t t = rem % d.series_length();
        if (d.is_missing(n, j, t)) values.push_back(nullptr);
        else values.push_back(d.value(n, j, t));
    }
    json kinds = json::array();
    for (FeatureKind k : d.schema.kinds) kinds.push_back(k == FeatureKind::categorical ? "categorical" : "continuous");
    return json{{"n", d.num_instances()},   {"p", d.num_features()},
                {"t", d.series_length()},   {"values", values},
                {"labels", d.labels},       {"num_classes", d.num_classes},
                {"label_names", d.label_names}, {"kinds", kinds},
                {"categories", d.schema.categories}};
}

TimeSeriesDataset dataset_from_json(const json& doc) {
    TimeSeriesDataset d(doc.at("n").get<std::size_t>(), doc.at("p").get<std::size_t>(),
                        doc.at("t").get<std::size_t>());
    d.labels = doc.at("labels").get<std::vector<int>>();
    d.num_classes = doc.at("num_classes").get<int>();
    d.label_names = doc.at("label_names").get<std::vector<std::string>>();
    const auto kinds = doc.at("kinds").get<std::vector<std::string>>();
    for (std::size_t j = 0; j < kinds.size(); ++j)
        d.schema.kinds[j] = kinds[j] == "categorical" ? FeatureKind::categorical : FeatureKind::continuous;
    d.schema.categories = doc.at("categories").get<std::vector<std::vector<std::string>>>();
    const json& values = doc.at("values");
    std::size_t i = 0;
    for (std::size_t n = 0; n < d.num_instances(); ++n)
        for (std::size_t j = 0; j < d.num_features(); ++j)
            for (std::size_t t = 0; t < d.series_length(); ++t, ++i) {
                if (values[i].is_null()) d.set_missing(n, j, t, true);
                else d.set_value(n, j, t, values[i].get<double>());
            }
    return d;
}

json forest_to_json(const Forest& f) {
    json trees = json::array();
    for (const Tree& t : f.trees) {
        json nodes = json::array();
        for (const TreeNode& nd : t.nodes)
            nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.leaf_id});
        json leaves = json::array();
        for (const LeafInfo& l : t.leaves)
            leaves.push_back({{"members", l.members}, {"total", l.total}, {"class_mass", l.class_mass}});
        trees.push_back({{"nodes", nodes},
                         {"leaves", leaves},
                         {"in_bag_counts", t.in_bag_counts},
                         {"leaf_of", t.leaf_of}});
    }
    return json{{"num_trees", f.params.num_trees}, {"max_depth", f.params.max_depth},
                {"min_leaf", f.params.min_leaf},   {"features_per_split", f.params.features_per_split},
                {"seed", f.params.seed},           {"num_classes", f.num_classes},
                {"num_features", f.num_features},  {"num_train", f.num_train},
                {"train_labels", f.train_labels},  {"single_class", f.single_class},
                {"trees", trees}};
}

Forest forest_from_json(const json& doc) {
    Forest f;
    f.params.num_trees = doc.at("num_trees").get<int>();
    f.params.max_depth = doc.at("max_depth").get<int>();
    f.params.min_leaf = doc.at("min_leaf").get<int>();
    f.params.features_per_split = doc.at("features_per_split").get<int>();
    f.params.seed = doc.at("seed").get<std::uint64_t>();
    f.num_classes = doc.at("num_classes").get<int>();
    f.num_features = doc.at("num_features").get<std::size_t>();
    f.num_train = doc.at("num_train").get<std::size_t>();
    f.train_labels = doc.at("train_labels").get<std::vector<int>>();
    f.single_class = doc.at("single_class").get<bool>();
    for (const json& tj : doc.at("trees")) {
        Tree t;
        for (const json& nj : tj.at("nodes")) {
            TreeNode nd;
            nd.feature = nj[0].get<int>();
            nd.threshold = nj[1].get<double>();
            nd.left = nj[2].get<int>();
            nd.right = nj[3].get<int>();
            nd.leaf_id = nj[4].get<int>();
            t.nodes.push_back(nd);
        }
        for (const json& lj : tj.at("leaves")) {
            LeafInfo l;
            l.members = lj.at("members").get<std::vector<std::pair<int, int>>>();
            l.total = lj.at("total").get<int>();
            l.class_mass = lj.at("class_mass").get<std::vector<double>>();
            t.leaves.push_back(std::move(l));
        }
        t.in_bag_counts = tj.at("in_bag_counts").get<std::vector<int>>();
        t.leaf_of = tj.at("leaf_of").get<std::vector<int>>();
        f.trees.push_back(std::move(t));
    }
    f.oob_trees.assign(f.num_train, {});
    for (std::size_t t = 0; t < f.trees.size(); ++t)
        for (std::size_t i = 0; i < f.num_train; ++i)
            if (f.trees[t].in_bag_counts[i] == 0) f.oob_trees[i].push_back(static_cast<int>(t));
    return f;
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << "\n";
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return json::parse(in);
}

}  // namespace

void GapImputer::save(const std::string& dir) const {
    if (!fitted_) throw DataError("gap imputer: save before fit");
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path base(dir);

    write_json_file(base / "config.json",
                    json{{"method", name()},
                         {"init_strategy", cfg_.init_strategy},
                         {"init_by_label", cfg_.init_by_label},
                         {"init_knn_k", cfg_.init_knn_k},
                         {"transform", to_string(cfg_.transform)},
                         {"kernel_count", cfg_.kernel_count},
                         {"max_iters", cfg_.max_iters},
                         {"internal_metric", cfg_.internal_metric},
                         {"renormalize_weights", cfg_.renormalize_weights},
                         {"update_observed", cfg_.update_observed},
                         {"forest",
                          {{"num_trees", cfg_.forest.num_trees},
                           {"max_depth", cfg_.forest.max_depth},
                           {"min_leaf", cfg_.forest.min_leaf},
                           {"features_per_split", cfg_.forest.features_per_split},
                           {"seed", cfg_.forest.seed}}}});

    json kernels = json::array();
    for (const Kernel& k : transform_.bank().kernels)
        kernels.push_back({{"length", k.length},
                           {"weights", k.weights},
                           {"bias", k.bias},
                           {"dilation", k.dilation},
                           {"padding", k.padding}});
    write_json_file(base / "transform.json",
                    json{{"kind", to_string(transform_.kind())},
                         {"p", transform_.input_features()},
                         {"t", transform_.input_length()},
                         {"bank_seed", transform_.bank().seed},
                         {"bank_series_length", transform_.bank().series_length},
                         {"kernels", kernels}});

    write_json_file(base / "forest.json", forest_to_json(forest_));
    write_json_file(base / "train.json", dataset_to_json(train_ref_));

    json iters = json::array();
    for (const IterationDiagnostics& d : diags_)
        iters.push_back({{"iteration", d.iteration}, {"per_feature", d.per_feature}, {"aggregate", d.aggregate}});
    write_json_file(base / "diagnostics.json",
                    json{{"iterations", iters},
                         {"best_iteration", best_iter_},
                         {"column_stats", train_column_stats_.data},
                         {"column_stats_rows", train_column_stats_.rows},
                         {"column_stats_cols", train_column_stats_.cols},
                         {"log", log_}});
}

std::unique_ptr<GapImputer> GapImputer::load(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path base(dir);
    const json cfgj = read_json_file(base / "config.json");
    GapConfig cfg;
    cfg.init_strategy = cfgj.at("init_strategy").get<std::string>();
    cfg.init_by_label = cfgj.at("init_by_label").get<bool>();
    cfg.init_knn_k = cfgj.at("init_knn_k").get<int>();
    cfg.transform = transform_kind_from_string(cfgj.at("transform").get<std::string>());
    cfg.kernel_count = cfgj.at("kernel_count").get<std::size_t>();
    cfg.max_iters = cfgj.at("max_iters").get<int>();
    cfg.internal_metric = cfgj.at("internal_metric").get<std::string>();
    cfg.renormalize_weights = cfgj.at("renormalize_weights").get<bool>();
    cfg.update_observed = cfgj.at("update_observed").get<bool>();
    const json& fj = cfgj.at("forest");
    cfg.forest.num_trees = fj.at("num_trees").get<int>();
    cfg.forest.max_depth = fj.at("max_depth").get<int>();
    cfg.forest.min_leaf = fj.at("min_leaf").get<int>();
    cfg.forest.features_per_split = fj.at("features_per_split").get<int>();
    cfg.forest.seed = fj.at("seed").get<std::uint64_t>();

    auto imp = std::make_unique<GapImputer>(cfg);

    const json tj = read_json_file(base / "transform.json");
    KernelBank bank;
    bank.seed = tj.at("bank_seed").get<std::uint64_t>();
    bank.series_length = tj.at("bank_series_length").get<std::size_t>();
    for (const json& kj : tj.at("kernels")) {
        Kernel k;
        k.length = kj.at("length").get<int>();
        k.weights = kj.at("weights").get<std::vector<double>>();
        k.bias = kj.at("bias").get<double>();
        k.dilation = kj.at("dilation").get<int>();
        k.padding = kj.at("padding").get<bool>();
        bank.kernels.push_back(std::move(k));
    }
    imp->transform_ = Transform::from_bank(transform_kind_from_string(tj.at("kind").get<std::string>()),
                                           tj.at("p").get<std::size_t>(), tj.at("t").get<std::size_t>(),
                                           std::move(bank));

    imp->forest_ = forest_from_json(read_json_file(base / "forest.json"));
    imp->train_ref_ = dataset_from_json(read_json_file(base / "train.json"));

    const json dj = read_json_file(base / "diagnostics.json");
    imp->best_iter_ = dj.at("best_iteration").get<int>();
    imp->train_column_stats_.rows = dj.at("column_stats_rows").get<std::size_t>();
    imp->train_column_stats_.cols = dj.at("column_stats_cols").get<std::size_t>();
    // NaN round-trips as null through JSON
    imp->train_column_stats_.data.clear();
    for (const json& v : dj.at("column_stats"))
        imp->train_column_stats_.data.push_back(v.is_null() ? kNaN : v.get<double>());
    for (const json& ij : dj.at("iterations")) {
        IterationDiagnostics d;
        d.iteration = ij.at("iteration").get<int>();
        d.per_feature = ij.at("per_feature").get<std::vector<double>>();
        d.aggregate = ij.at("aggregate").get<double>();
        imp->diags_.push_back(std::move(d));
    }
    imp->log_ = dj.at("log").get<std::vector<std::string>>();
    imp->fitted_ = true;
    return imp;
}

}  // namespace tsgap
