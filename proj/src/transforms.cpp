#include "tsgap/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tsgap {

TransformKind transform_kind_from_string(const std::string& name) {
    if (name == "raw") return TransformKind::raw;
    if (name == "summary") return TransformKind::summary;
    if (name == "kernels") return TransformKind::kernels;
    throw UsageError("unknown transform kind: " + name);
}

std::string to_string(TransformKind kind) {
    switch (kind) {
        case TransformKind::raw: return "raw";
        case TransformKind::summary: return "summary";
        case TransformKind::kernels: return "kernels";
    }
    return "raw";
}

namespace {

void require_complete(const TimeSeriesDataset& dataset, const char* op) {
    if (!dataset.complete()) throw DataError(std::string(op) + ": dataset has missing entries");
}

}  // namespace

RowMatrix raw_transform(const TimeSeriesDataset& dataset) {
    require_complete(dataset, "raw_transform");
    const std::size_t n = dataset.num_instances(), p = dataset.num_features(), t = dataset.series_length();
    RowMatrix out(n, p * t);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t s = 0; s < t; ++s) out.at(i, j * t + s) = dataset.value(i, j, s);
    return out;
}

namespace {

double quantile_linear(std::vector<double> sorted, double q) {
    // expects sorted input; linear interpolation between order statistics
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<double> summary_statistics(const double* x, std::size_t n) {
    std::vector<double> out(kSummaryStatCount, 0.0);
    if (n == 0) return out;
    const double nd = static_cast<double>(n);
    const double mean = std::accumulate(x, x + n, 0.0) / nd;
    double m2 = 0.0, m3 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= nd;
    m3 /= nd;
    const double sd = std::sqrt(m2);

    std::vector<double> sorted(x, x + n);
    std::sort(sorted.begin(), sorted.end());
    const double median = quantile_linear(sorted, 0.5);
    const double iqr = quantile_linear(sorted, 0.75) - quantile_linear(sorted, 0.25);
    const double skew = sd > 0.0 ? m3 / (sd * sd * sd) : 0.0;

    // least-squares slope over t = 0..n-1
    double slope = 0.0;
    if (n >= 2) {
        const double tbar = (nd - 1.0) / 2.0;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dt = static_cast<double>(i) - tbar;
            num += dt * (x[i] - mean);
            den += dt * dt;
        }
        slope = num / den;
    }

    double autocorr = 0.0;
    if (n >= 2 && m2 > 0.0) {
        double num = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) num += (x[i] - mean) * (x[i + 1] - mean);
        autocorr = num / (m2 * nd);
    }

    double crossings = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i)
        if ((x[i] <= mean) != (x[i + 1] <= mean)) crossings += 1.0;

    out[0] = mean;
    out[1] = sd;
    out[2] = sorted.front();
    out[3] = sorted.back();
    out[4] = median;
    out[5] = iqr;
    out[6] = skew;
    out[7] = slope;
    out[8] = autocorr;
    out[9] = crossings;
    return out;
}

RowMatrix summary_transform(const TimeSeriesDataset& dataset) {
    require_complete(dataset, "summary_transform");
    const std::size_t n = dataset.num_instances(), p = dataset.num_features(), t = dataset.series_length();
    RowMatrix out(n, p * kSummaryStatCount);
    std::vector<double> series(t);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t s = 0; s < t; ++s) series[s] = dataset.value(i, j, s);
            const auto stats = summary_statistics(series.data(), t);
            for (std::size_t f = 0; f < kSummaryStatCount; ++f) out.at(i, j * kSummaryStatCount + f) = stats[f];
        }
    return out;
}

KernelBank generate_kernels(std::size_t series_length, std::size_t count, std::uint64_t seed) {
    if (count < 1) throw UsageError("generate_kernels: need at least one kernel");
    if (series_length < 2) throw DataError("generate_kernels: series too short");
    KernelBank bank;
    bank.series_length = series_length;
    bank.seed = seed;
    Rng rng = make_rng(mix_seed(seed, "kernel_bank"));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> bias_dist(-1.0, 1.0);
    const int lengths[] = {7, 9, 11};

    bank.kernels.reserve(count);
    while (bank.kernels.size() < count) {
        Kernel k;
        std::uniform_int_distribution<int> len_pick(0, 2);
        k.length = lengths[len_pick(rng)];
        k.weights.resize(static_cast<std::size_t>(k.length));
        double wsum = 0.0;
        for (double& w : k.weights) {
            w = normal(rng);
            wsum += w;
        }
        const double wmean = wsum / static_cast<double>(k.length);
        for (double& w : k.weights) w -= wmean;
        k.bias = bias_dist(rng);
        k.padding = unit(rng) < 0.5;

        const double max_exp =
            std::log2(static_cast<double>(series_length - 1) / static_cast<double>(k.length - 1));
        if (max_exp < 0.0) {
            // receptive field cannot fit even at dilation 1: redraw with padding
            if (static_cast<std::size_t>(k.length) > series_length + (k.padding ? static_cast<std::size_t>(k.length - 1) : 0))
                continue;  // regenerate
            k.dilation = 1;
        } else {
            k.dilation = static_cast<int>(std::floor(std::pow(2.0, unit(rng) * max_exp)));
            if (k.dilation < 1) k.dilation = 1;
        }
        const int pad = k.padding ? ((k.length - 1) * k.dilation) / 2 : 0;
        const int out_len = static_cast<int>(series_length) + 2 * pad - (k.length - 1) * k.dilation;
        if (out_len < 1) continue;  // regenerate
        bank.kernels.push_back(std::move(k));
    }
    return bank;
}

double kernel_activation(const Kernel& k, const double* series, std::size_t length, int out_pos, int pad) {
    double acc = k.bias;
    for (int m = 0; m < k.length; ++m) {
        const int idx = out_pos + m * k.dilation - pad;
        if (idx >= 0 && idx < static_cast<int>(length)) acc += k.weights[static_cast<std::size_t>(m)] * series[idx];
    }
    return acc;
}

RowMatrix kernel_transform(const TimeSeriesDataset& dataset, const KernelBank& bank) {
    require_complete(dataset, "kernel_transform");
    if (dataset.series_length() != bank.series_length)
        throw DataError("kernel_transform: series length does not match fitted bank");
    const std::size_t n = dataset.num_instances(), p = dataset.num_features(), t = dataset.series_length();
    const std::size_t kcount = bank.kernels.size();
    RowMatrix out(n, p * 2 * kcount);
    std::vector<double> series(t);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t s = 0; s < t; ++s) series[s] = dataset.value(i, j, s);
            for (std::size_t ki = 0; ki < kcount; ++ki) {
                const Kernel& k = bank.kernels[ki];
                const int pad = k.padding ? ((k.length - 1) * k.dilation) / 2 : 0;
                const int out_len = static_cast<int>(t) + 2 * pad - (k.length - 1) * k.dilation;
                int positive = 0;
                double maxv = -std::numeric_limits<double>::infinity();
                for (int pos = 0; pos < out_len; ++pos) {
                    const double a = kernel_activation(k, series.data(), t, pos, pad);
                    if (a > 0.0) ++positive;
                    maxv = std::max(maxv, a);
                }
                const double ppv = out_len > 0 ? static_cast<double>(positive) / static_cast<double>(out_len) : 0.0;
                out.at(i, (j * kcount + ki) * 2 + 0) = ppv;
                out.at(i, (j * kcount + ki) * 2 + 1) = maxv;
            }
        }
    return out;
}

Transform Transform::fit(TransformKind kind, std::size_t p, std::size_t t, std::size_t kernel_count,
                         std::uint64_t seed) {
    Transform tf;
    tf.kind_ = kind;
    tf.p_ = p;
    tf.t_ = t;
    switch (kind) {
        case TransformKind::raw: tf.dim_ = p * t; break;
        case TransformKind::summary: tf.dim_ = p * kSummaryStatCount; break;
        case TransformKind::kernels:
            tf.bank_ = generate_kernels(t, kernel_count, seed);
            tf.dim_ = p * 2 * tf.bank_.kernels.size();
            break;
    }
    return tf;
}

Transform Transform::from_bank(TransformKind kind, std::size_t p, std::size_t t, KernelBank bank) {
    Transform tf;
    tf.kind_ = kind;
    tf.p_ = p;
    tf.t_ = t;
    tf.bank_ = std::move(bank);
    tf.dim_ = kind == TransformKind::kernels ? p * 2 * tf.bank_.kernels.size()
              : kind == TransformKind::summary ? p * kSummaryStatCount
                                               : p * t;
    return tf;
}

RowMatrix Transform::apply(const TimeSeriesDataset& dataset) const {
    if (dataset.num_features() != p_ || dataset.series_length() != t_)
        throw DataError("transform: dataset shape does not match fitted shape");
    switch (kind_) {
        case TransformKind::raw: return raw_transform(dataset);
        case TransformKind::summary: return summary_transform(dataset);
        case TransformKind::kernels: return kernel_transform(dataset, bank_);
    }
    throw DataError("transform: unknown kind");
}

}  // namespace tsgap
