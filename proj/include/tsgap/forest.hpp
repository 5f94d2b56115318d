#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tsgap/common.hpp"

namespace tsgap {

struct ForestParams {
    int num_trees = 200;
    int max_depth = 0;      // 0 = grow to purity
    int min_leaf = 1;
    int features_per_split = 0;  // 0 = floor(sqrt(d))
    std::uint64_t seed = 0;
};

// Terminal node bookkeeping needed for GAP proximities: the in-bag multiset
// that landed in the leaf, its size, and its class mass.
struct LeafInfo {
    std::vector<std::pair<int, int>> members;  // (train index, bootstrap count), count > 0
    int total = 0;                             // multiset size |M|
    std::vector<double> class_mass;            // per class, sum of counts
};

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_id = -1;  // >= 0 iff terminal
};

struct Tree {
    std::vector<TreeNode> nodes;
    std::vector<LeafInfo> leaves;
    std::vector<int> in_bag_counts;  // per training instance, sums to N
    std::vector<int> leaf_of;        // per training instance (in-bag and OOB alike)

    int route(const double* row) const;
};

struct Forest {
    std::vector<Tree> trees;
    std::vector<std::vector<int>> oob_trees;  // per instance: trees where it is OOB
    std::vector<int> train_labels;
    int num_classes = 0;
    std::size_t num_features = 0;
    std::size_t num_train = 0;
    ForestParams params;
    bool single_class = false;  // all labels identical: trivial one-leaf trees
};

// Sparse row-stochastic proximity matrix; rows index query points, columns
// index training points. A row is undefined when the query had no OOB trees.
struct ProximityMatrix {
    enum class Kind { train_oob, test };
    Kind kind = Kind::train_oob;
    std::size_t num_train = 0;
    std::vector<std::vector<std::pair<int, double>>> rows;  // sorted by column
    std::vector<std::uint8_t> defined;

    double at(std::size_t r, std::size_t c) const;
    double row_sum(std::size_t r) const;
};

Forest fit_forest(const RowMatrix& features, const std::vector<int>& labels, int num_classes,
                  const ForestParams& params);

ProximityMatrix gap_proximities(const Forest& forest);
ProximityMatrix gap_proximities_test(const Forest& forest, const RowMatrix& test_features);

// Classic co-leaf fraction; reference oracle for leaf bookkeeping, not used
// in the imputation path.
RowMatrix classic_proximity(const Forest& forest);

// OOB prediction averages leaf in-bag class proportions over OOB trees, so it
// coincides with the GAP-weighted neighbor vote. nullopt when no OOB trees.
std::vector<std::optional<int>> oob_predict(const Forest& forest);
std::vector<int> predict(const Forest& forest, const RowMatrix& features);
std::vector<std::vector<double>> predict_proba(const Forest& forest, const RowMatrix& features);

}  // namespace tsgap
