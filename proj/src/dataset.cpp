#include "tsgap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace tsgap {

void FeatureSchema::validate() const {
    if (kinds.size() != categories.size())
        throw DataError("schema: kinds/categories size mismatch");
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        const bool cat = kinds[j] == FeatureKind::categorical;
        if (cat && categories[j].empty())
            throw DataError("schema: categorical feature " + std::to_string(j) + " has empty category set");
        if (!cat && !categories[j].empty())
            throw DataError("schema: continuous feature " + std::to_string(j) + " carries categories");
    }
}

TimeSeriesDataset::TimeSeriesDataset(std::size_t n, std::size_t p, std::size_t t)
    : n_(n), p_(p), t_(t), values_(n * p * t, 0.0), missing_(n * p * t, 0) {
    labels.assign(n, 0);
    schema = FeatureSchema::all_continuous(p);
}

std::size_t TimeSeriesDataset::missing_count() const {
    return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), std::uint8_t{1}));
}

std::size_t TimeSeriesDataset::observed_count(std::size_t n, std::size_t j) const {
    std::size_t c = 0;
    for (std::size_t t = 0; t < t_; ++t)
        if (!is_missing(n, j, t)) ++c;
    return c;
}

void TimeSeriesDataset::validate() const {
    if (values_.size() != n_ * p_ * t_ || missing_.size() != values_.size())
        throw DataError("dataset: values/mask shape mismatch");
    if (labels.size() != n_) throw DataError("dataset: labels size != N");
    for (int y : labels)
        if (y < 0 || y >= num_classes) throw DataError("dataset: label out of range");
    if (schema.kinds.size() != p_) throw DataError("dataset: schema size != p");
    schema.validate();
    if (!ids.empty() && ids.size() != n_) throw DataError("dataset: ids size != N");
}

std::pair<TimeSeriesDataset, StandardizationParams> standardize(const TimeSeriesDataset& dataset,
                                                                bool dataset_level) {
    const std::size_t n = dataset.num_instances(), p = dataset.num_features(), t = dataset.series_length();
    TimeSeriesDataset out = dataset;
    StandardizationParams params;
    params.mean = RowMatrix(n, p, 0.0);
    params.scale = RowMatrix(n, p, 1.0);
    params.degenerate.assign(n * p, 0);
    params.dataset_level = dataset_level;

    auto moments = [](const std::vector<double>& xs) {
        double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        double sd = std::sqrt(ss / static_cast<double>(xs.size()));  // population sd
        return std::pair<double, double>{mean, sd};
    };

    for (std::size_t j = 0; j < p; ++j) {
        if (dataset.schema.is_categorical(j)) continue;
        if (dataset_level) {
            std::vector<double> obs;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t s = 0; s < t; ++s)
                    if (!dataset.is_missing(i, j, s)) obs.push_back(dataset.value(i, j, s));
            if (obs.empty()) throw DataError("standardize: feature " + std::to_string(j) + " fully missing");
            auto [mean, sd] = moments(obs);
            const bool degen = sd == 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                params.mean.at(i, j) = mean;
                params.scale.at(i, j) = degen ? 1.0 : sd;
                params.degenerate[i * p + j] = degen ? 1 : 0;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> obs;
                for (std::size_t s = 0; s < t; ++s)
                    if (!dataset.is_missing(i, j, s)) obs.push_back(dataset.value(i, j, s));
                if (obs.empty())
                    throw DataError("standardize: instance " + std::to_string(i) + " feature " +
                                    std::to_string(j) + " has no observed values");
                auto [mean, sd] = moments(obs);
                params.mean.at(i, j) = mean;
                params.scale.at(i, j) = sd == 0.0 ? 1.0 : sd;
                params.degenerate[i * p + j] = sd == 0.0 ? 1 : 0;
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t s = 0; s < t; ++s)
                if (!dataset.is_missing(i, j, s))
                    out.set_value(i, j, s, (dataset.value(i, j, s) - params.mean.at(i, j)) / params.scale.at(i, j));
    }
    return {std::move(out), std::move(params)};
}

TimeSeriesDataset invert_standardization(const TimeSeriesDataset& dataset, const StandardizationParams& params) {
    TimeSeriesDataset out = dataset;
    const std::size_t n = dataset.num_instances(), p = dataset.num_features(), t = dataset.series_length();
    if (params.mean.rows != n || params.mean.cols != p)
        throw DataError("invert_standardization: params shape mismatch");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            if (dataset.schema.is_categorical(j)) continue;
            for (std::size_t s = 0; s < t; ++s)
                if (!dataset.is_missing(i, j, s))
                    out.set_value(i, j, s, dataset.value(i, j, s) * params.scale.at(i, j) + params.mean.at(i, j));
        }
    return out;
}

SplitResult train_test_split(const TimeSeriesDataset& dataset, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw UsageError("train_test_split: test_fraction must be in (0,1)");
    const std::size_t n = dataset.num_instances();
    if (n < 2) throw DataError("train_test_split: need at least 2 instances");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);

    SplitResult result;
    Rng rng = make_rng(mix_seed(seed, "train_test_split"));

    // Per-class quotas by largest remainder so the overall test size is
    // round(N * fraction) while each class keeps at least one train instance.
    std::vector<int> classes;
    std::size_t eligible = 0;
    for (auto& [cls, indices] : by_class) {
        std::shuffle(indices.begin(), indices.end(), rng);
        if (indices.size() == 1) {
            result.train_indices.push_back(indices[0]);
            result.warnings.push_back("class " + std::to_string(cls) +
                                      " has a single instance; assigned to train");
        } else {
            classes.push_back(cls);
            eligible += indices.size();
        }
    }
    if (eligible >= 2) {
        auto total_want = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(eligible)));
        total_want = std::min(std::max<std::size_t>(total_want, 1), eligible - 1);
        std::map<int, std::size_t> want;
        std::vector<std::pair<double, int>> remainders;  // (-frac, class) for stable ordering
        std::size_t assigned = 0;
        for (const int cls : classes) {
            const double quota = test_fraction * static_cast<double>(by_class[cls].size());
            const auto base = std::min(static_cast<std::size_t>(quota), by_class[cls].size() - 1);
            want[cls] = base;
            assigned += base;
            remainders.emplace_back(-(quota - static_cast<double>(base)), cls);
        }
        std::sort(remainders.begin(), remainders.end());
        for (const auto& [neg_frac, cls] : remainders) {
            if (assigned >= total_want) break;
            if (want[cls] < by_class[cls].size() - 1) {
                ++want[cls];
                ++assigned;
            }
        }
        for (const int cls : classes) {
            const auto& indices = by_class[cls];
            for (std::size_t k = 0; k < indices.size(); ++k)
                (k < want[cls] ? result.test_indices : result.train_indices).push_back(indices[k]);
        }
    } else {
        for (const int cls : classes)
            for (const std::size_t i : by_class[cls]) result.train_indices.push_back(i);
    }
    if (result.train_indices.empty() || result.test_indices.empty())
        throw DataError("train_test_split: a split part is empty");
    std::sort(result.train_indices.begin(), result.train_indices.end());
    std::sort(result.test_indices.begin(), result.test_indices.end());
    result.train = subset(dataset, result.train_indices);
    result.test = subset(dataset, result.test_indices);
    return result;
}

TimeSeriesDataset subset(const TimeSeriesDataset& dataset, const std::vector<std::size_t>& indices) {
    TimeSeriesDataset out(indices.size(), dataset.num_features(), dataset.series_length());
    out.schema = dataset.schema;
    out.num_classes = dataset.num_classes;
    out.label_names = dataset.label_names;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        out.labels[k] = dataset.labels[i];
        if (!dataset.ids.empty()) {
            if (out.ids.empty()) out.ids.assign(indices.size(), "");
            out.ids[k] = dataset.ids[i];
        }
        for (std::size_t j = 0; j < dataset.num_features(); ++j)
            for (std::size_t t = 0; t < dataset.series_length(); ++t) {
                out.set_value(k, j, t, dataset.value(i, j, t));
                out.set_missing(k, j, t, dataset.is_missing(i, j, t));
            }
    }
    return out;
}

TimeSeriesDataset poisoned_copy(const TimeSeriesDataset& dataset) {
    TimeSeriesDataset out = dataset;
    for (std::size_t i = 0; i < dataset.num_instances(); ++i)
        for (std::size_t j = 0; j < dataset.num_features(); ++j)
            for (std::size_t t = 0; t < dataset.series_length(); ++t)
                if (dataset.is_missing(i, j, t)) out.set_value(i, j, t, kPoisonSentinel);
    return out;
}

bool contains_poison(const std::vector<double>& values) {
    for (double v : values)
        if (std::abs(v) > 1.0e200) return true;
    return false;
}

}  // namespace tsgap
