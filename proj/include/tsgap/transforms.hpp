#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsgap/common.hpp"
#include "tsgap/dataset.hpp"

namespace tsgap {

enum class TransformKind { raw, summary, kernels };

TransformKind transform_kind_from_string(const std::string& name);
std::string to_string(TransformKind kind);

struct Kernel {
    int length = 0;
    std::vector<double> weights;  // mean-centered
    double bias = 0.0;
    int dilation = 1;
    bool padding = false;
};

struct KernelBank {
    std::vector<Kernel> kernels;
    std::size_t series_length = 0;
    std::uint64_t seed = 0;
};

KernelBank generate_kernels(std::size_t series_length, std::size_t count, std::uint64_t seed);

// Dilated convolution activations at one output position (zero padded).
double kernel_activation(const Kernel& k, const double* series, std::size_t length, int out_pos, int pad);

// Fitted feature map from an (p, T) panel to a fixed-width matrix. The kernel
// bank is drawn once at fit time; raw and summary carry no state.
class Transform {
public:
    static Transform fit(TransformKind kind, std::size_t p, std::size_t t, std::size_t kernel_count,
                         std::uint64_t seed);

    RowMatrix apply(const TimeSeriesDataset& dataset) const;  // requires a complete dataset

    TransformKind kind() const { return kind_; }
    std::size_t output_dim() const { return dim_; }
    std::size_t input_features() const { return p_; }
    std::size_t input_length() const { return t_; }
    const KernelBank& bank() const { return bank_; }

    static Transform from_bank(TransformKind kind, std::size_t p, std::size_t t, KernelBank bank);

private:
    TransformKind kind_ = TransformKind::raw;
    std::size_t p_ = 0, t_ = 0, dim_ = 0;
    KernelBank bank_;
};

// Per-channel summary statistics in this fixed order: mean, sd, min, max,
// median, iqr, skewness, slope, lag-1 autocorrelation, mean crossings.
constexpr std::size_t kSummaryStatCount = 10;
std::vector<double> summary_statistics(const double* series, std::size_t length);

RowMatrix raw_transform(const TimeSeriesDataset& dataset);
RowMatrix summary_transform(const TimeSeriesDataset& dataset);
RowMatrix kernel_transform(const TimeSeriesDataset& dataset, const KernelBank& bank);

}  // namespace tsgap
