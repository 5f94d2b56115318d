#include "tsgap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsgap {

double rmse_at_removed(const TimeSeriesDataset& imputed, const std::vector<Removal>& log) {
    if (log.empty()) throw UsageError("rmse_at_removed: empty removal log");
    double ss = 0.0;
    for (const Removal& r : log) {
        const double d = imputed.value(r.instance, r.feature, r.time) - r.value;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(log.size()));
}

double r2_score(const std::vector<double>& truth, const std::vector<double>& estimates) {
    if (truth.size() != estimates.size() || truth.empty()) throw DataError("r2_score: size mismatch");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - estimates[i]) * (truth[i] - estimates[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
    return 1.0 - ss_res / ss_tot;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& predictions) {
    if (truth.size() != predictions.size() || truth.empty()) throw DataError("accuracy: size mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == predictions[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& predictions, int class_count) {
    if (truth.size() != predictions.size() || truth.empty()) throw DataError("macro_f1: size mismatch");
    if (class_count < 1) throw DataError("macro_f1: class_count must be positive");
    double total = 0.0;
    for (int c = 0; c < class_count; ++c) {
        double tp = 0.0, fp = 0.0, fn = 0.0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool t = truth[i] == c, p = predictions[i] == c;
            if (t && p) tp += 1.0;
            else if (!t && p) fp += 1.0;
            else if (t && !p) fn += 1.0;
        }
        const double denom = 2.0 * tp + fp + fn;
        total += denom == 0.0 ? 0.0 : 2.0 * tp / denom;
    }
    return total / static_cast<double>(class_count);
}

double mean_absolute_error(const std::vector<double>& truth, const std::vector<double>& estimates) {
    if (truth.size() != estimates.size() || truth.empty()) throw DataError("mae: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - estimates[i]);
    return s / static_cast<double>(truth.size());
}

double root_mean_squared_error(const std::vector<double>& truth, const std::vector<double>& estimates) {
    if (truth.size() != estimates.size() || truth.empty()) throw DataError("rmse: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += (truth[i] - estimates[i]) * (truth[i] - estimates[i]);
    return std::sqrt(s / static_cast<double>(truth.size()));
}

std::vector<int> knn_classify(const RowMatrix& train_features, const std::vector<int>& train_labels,
                              const RowMatrix& test_features, int k) {
    if (train_features.cols != test_features.cols) throw DataError("knn_classify: dimension mismatch");
    if (k < 1 || static_cast<std::size_t>(k) > train_features.rows)
        throw UsageError("knn_classify: k must be in [1, N_train]");
    const int num_classes = train_labels.empty() ? 0 : *std::max_element(train_labels.begin(), train_labels.end()) + 1;

    std::vector<int> out(test_features.rows);
    std::vector<std::pair<double, std::size_t>> dist(train_features.rows);
    for (std::size_t m = 0; m < test_features.rows; ++m) {
        for (std::size_t i = 0; i < train_features.rows; ++i) {
            double d = 0.0;
            const double* a = test_features.row(m);
            const double* b = train_features.row(i);
            for (std::size_t c = 0; c < train_features.cols; ++c) d += (a[c] - b[c]) * (a[c] - b[c]);
            dist[i] = {d, i};
        }
        std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
        std::vector<int> votes(static_cast<std::size_t>(num_classes), 0);
        for (int i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(train_labels[dist[static_cast<std::size_t>(i)].second])];
        int best = 0;
        for (int c = 1; c < num_classes; ++c)
            if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
        out[m] = best;
    }
    return out;
}

}  // namespace tsgap
