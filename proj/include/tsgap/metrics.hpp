#pragma once

#include <vector>

#include "tsgap/common.hpp"
#include "tsgap/missingness.hpp"

namespace tsgap {

// RMSE over the logged removal positions of an imputed dataset.
double rmse_at_removed(const TimeSeriesDataset& imputed, const std::vector<Removal>& log);

// R^2 = 1 - SS_res / SS_tot. Constant truth: 1 when estimates match exactly,
// otherwise 0.
double r2_score(const std::vector<double>& truth, const std::vector<double>& estimates);

double accuracy(const std::vector<int>& truth, const std::vector<int>& predictions);

// Macro-averaged F1 over class_count classes; classes absent from both truth
// and predictions contribute 0.
double macro_f1(const std::vector<int>& truth, const std::vector<int>& predictions, int class_count);

double mean_absolute_error(const std::vector<double>& truth, const std::vector<double>& estimates);
double root_mean_squared_error(const std::vector<double>& truth, const std::vector<double>& estimates);

// Euclidean k-NN; distance ties resolved by training index, vote ties by
// lowest class index.
std::vector<int> knn_classify(const RowMatrix& train_features, const std::vector<int>& train_labels,
                              const RowMatrix& test_features, int k);

}  // namespace tsgap
