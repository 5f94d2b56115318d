#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsgap/common.hpp"

namespace tsgap {

enum class FeatureKind { continuous, categorical };

struct FeatureSchema {
    std::vector<FeatureKind> kinds;                     // one per feature channel
    std::vector<std::vector<std::string>> categories;   // non-empty exactly for categorical

    static FeatureSchema all_continuous(std::size_t p) {
        FeatureSchema s;
        s.kinds.assign(p, FeatureKind::continuous);
        s.categories.assign(p, {});
        return s;
    }
    bool is_categorical(std::size_t j) const { return kinds[j] == FeatureKind::categorical; }
    void validate() const;
};

// Labeled N x p x T panel with an authoritative missingness mask. The stored
// value at a masked position is meaningless and must never be read; categorical
// channels hold category codes 0..|C_j|-1 as doubles.
class TimeSeriesDataset {
public:
    TimeSeriesDataset() = default;
    TimeSeriesDataset(std::size_t n, std::size_t p, std::size_t t);

    std::size_t num_instances() const { return n_; }
    std::size_t num_features() const { return p_; }
    std::size_t series_length() const { return t_; }
    std::size_t size() const { return n_ * p_ * t_; }

    double value(std::size_t n, std::size_t j, std::size_t t) const { return values_[idx(n, j, t)]; }
    void set_value(std::size_t n, std::size_t j, std::size_t t, double v) { values_[idx(n, j, t)] = v; }
    bool is_missing(std::size_t n, std::size_t j, std::size_t t) const { return missing_[idx(n, j, t)] != 0; }
    void set_missing(std::size_t n, std::size_t j, std::size_t t, bool m) { missing_[idx(n, j, t)] = m ? 1 : 0; }

    std::size_t missing_count() const;
    bool complete() const { return missing_count() == 0; }
    std::size_t observed_count(std::size_t n, std::size_t j) const;

    std::vector<int> labels;              // class index in 0..C-1
    int num_classes = 0;
    std::vector<std::string> label_names; // original label tokens, index = class id
    FeatureSchema schema;
    std::vector<std::string> ids;         // optional, empty or size N

    const std::vector<double>& raw_values() const { return values_; }
    const std::vector<std::uint8_t>& raw_mask() const { return missing_; }

    void validate() const;  // throws DataError on any broken invariant

    std::size_t idx(std::size_t n, std::size_t j, std::size_t t) const { return (n * p_ + j) * t_ + t; }

private:
    std::size_t n_ = 0, p_ = 0, t_ = 0;
    std::vector<double> values_;
    std::vector<std::uint8_t> missing_;
};

struct StandardizationParams {
    // per (instance, feature): value -> (value - mean) / scale
    RowMatrix mean;   // N x p
    RowMatrix scale;  // N x p, 1.0 where degenerate
    std::vector<std::uint8_t> degenerate;  // N x p flags, zero observed variance
    bool dataset_level = false;

    bool is_degenerate(std::size_t n, std::size_t j) const { return degenerate[n * mean.cols + j] != 0; }
};

// Z-normalizes each continuous channel over its observed entries only.
// dataset_level pools statistics over all instances of a feature instead.
std::pair<TimeSeriesDataset, StandardizationParams> standardize(const TimeSeriesDataset& dataset,
                                                                bool dataset_level = false);
TimeSeriesDataset invert_standardization(const TimeSeriesDataset& dataset, const StandardizationParams& params);

struct SplitResult {
    TimeSeriesDataset train;
    TimeSeriesDataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
    std::vector<std::string> warnings;
};

// Stratified where class counts allow; a singleton class always goes to train.
SplitResult train_test_split(const TimeSeriesDataset& dataset, double test_fraction, std::uint64_t seed);

TimeSeriesDataset subset(const TimeSeriesDataset& dataset, const std::vector<std::size_t>& indices);

// Debug aid: overwrite every masked slot with an extreme sentinel so that any
// code path reading a masked value corrupts its output detectably.
constexpr double kPoisonSentinel = -1.0e300;
TimeSeriesDataset poisoned_copy(const TimeSeriesDataset& dataset);
bool contains_poison(const std::vector<double>& values);

}  // namespace tsgap
