#include "tsgap/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace tsgap {

int Tree::route(const double* row) const {
    int node = 0;
    while (nodes[node].leaf_id < 0)
        node = row[nodes[node].feature] <= nodes[node].threshold ? nodes[node].left : nodes[node].right;
    return nodes[node].leaf_id;
}

double ProximityMatrix::at(std::size_t r, std::size_t c) const {
    for (const auto& [col, w] : rows[r])
        if (static_cast<std::size_t>(col) == c) return w;
    return 0.0;
}

double ProximityMatrix::row_sum(std::size_t r) const {
    double s = 0.0;
    for (const auto& [col, w] : rows[r]) s += w;
    return s;
}

namespace {

struct TreeBuilder {
    const RowMatrix& features;
    const std::vector<int>& labels;
    int num_classes;
    int max_depth;
    int min_leaf;
    int mtry;
    Rng& rng;
    Tree& tree;

    // sample: training indices with bootstrap multiplicity expanded
    void build(std::vector<int>& sample, int depth, int node_index) {
        std::vector<double> counts(num_classes, 0.0);
        for (int i : sample) counts[labels[i]] += 1.0;
        const int nonzero = static_cast<int>(std::count_if(counts.begin(), counts.end(),
                                                           [](double c) { return c > 0.0; }));
        const bool stop = nonzero <= 1 ||
                          static_cast<int>(sample.size()) < 2 * min_leaf ||
                          (max_depth > 0 && depth >= max_depth);
        if (!stop) {
            int best_feature = -1;
            double best_threshold = 0.0, best_impurity = impurity(counts, sample.size());
            if (try_split(sample, best_feature, best_threshold, best_impurity)) {
                std::vector<int> left, right;
                for (int i : sample)
                    (features.at(static_cast<std::size_t>(i), static_cast<std::size_t>(best_feature)) <=
                             best_threshold
                         ? left
                         : right)
                        .push_back(i);
                sample.clear();
                sample.shrink_to_fit();
                const int l = static_cast<int>(tree.nodes.size());
                const int r = l + 1;
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                // re-index after emplace_back: the vector may have reallocated
                TreeNode& nd = tree.nodes[node_index];
                nd.feature = best_feature;
                nd.threshold = best_threshold;
                nd.left = l;
                nd.right = r;
                build(left, depth + 1, l);
                build(right, depth + 1, r);
                return;
            }
        }
        make_leaf(sample, node_index, counts);
    }

    static double impurity(const std::vector<double>& counts, std::size_t total) {
        double g = 1.0;
        for (double c : counts) {
            const double p = c / static_cast<double>(total);
            g -= p * p;
        }
        return g;
    }

    bool try_split(const std::vector<int>& sample, int& best_feature, double& best_threshold,
                   double parent_impurity) {
        const int d = static_cast<int>(features.cols);
        std::vector<int> feats(d);
        std::iota(feats.begin(), feats.end(), 0);
        // partial Fisher-Yates for the first mtry features
        for (int k = 0; k < mtry && k < d; ++k) {
            std::uniform_int_distribution<int> pick(k, d - 1);
            std::swap(feats[k], feats[pick(rng)]);
        }
        double best_score = -1.0;
        const double n = static_cast<double>(sample.size());
        std::vector<std::pair<double, int>> vals;
        std::vector<double> left_counts(num_classes), right_counts(num_classes);
        auto scan = [&](int f) {
            vals.clear();
            for (int i : sample)
                vals.emplace_back(features.at(static_cast<std::size_t>(i), static_cast<std::size_t>(f)),
                                  labels[i]);
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) return;
            std::fill(left_counts.begin(), left_counts.end(), 0.0);
            std::fill(right_counts.begin(), right_counts.end(), 0.0);
            for (const auto& [v, y] : vals) right_counts[y] += 1.0;
            double nl = 0.0;
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                left_counts[vals[k].second] += 1.0;
                right_counts[vals[k].second] -= 1.0;
                nl += 1.0;
                if (vals[k].first == vals[k + 1].first) continue;
                const double nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                double gl = 1.0, gr = 1.0;
                for (int c = 0; c < num_classes; ++c) {
                    gl -= (left_counts[c] / nl) * (left_counts[c] / nl);
                    gr -= (right_counts[c] / nr) * (right_counts[c] / nr);
                }
                const double score = parent_impurity - (nl / n) * gl - (nr / n) * gr;
                if (score > best_score + 1e-15) {
                    best_score = score;
                    best_feature = f;
                    best_threshold = vals[k].first + 0.5 * (vals[k + 1].first - vals[k].first);
                }
            }
        };
        for (int k = 0; k < mtry && k < d; ++k) scan(feats[k]);
        if (best_score <= 1e-12) {
            // selected features were unsplittable; fall back to all features once
            best_score = -1.0;
            for (int f = 0; f < d; ++f) scan(f);
        }
        return best_score > 1e-12;
    }

    void make_leaf(const std::vector<int>& sample, int node_index, const std::vector<double>& counts) {
        LeafInfo leaf;
        leaf.total = static_cast<int>(sample.size());
        leaf.class_mass = counts;
        std::map<int, int> mult;
        for (int i : sample) ++mult[i];
        leaf.members.assign(mult.begin(), mult.end());
        tree.nodes[node_index].leaf_id = static_cast<int>(tree.leaves.size());
        tree.leaves.push_back(std::move(leaf));
    }
};

Tree fit_tree(const RowMatrix& features, const std::vector<int>& labels, int num_classes,
              const ForestParams& params, std::uint64_t tree_seed) {
    const std::size_t n = features.rows;
    Rng rng = make_rng(tree_seed);
    Tree tree;
    tree.in_bag_counts.assign(n, 0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<int> sample;
    sample.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = pick(rng);
        ++tree.in_bag_counts[i];
        sample.push_back(static_cast<int>(i));
    }
    std::sort(sample.begin(), sample.end());

    int mtry = params.features_per_split;
    if (mtry <= 0) mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(features.cols)))));
    mtry = std::min(mtry, static_cast<int>(features.cols));

    tree.nodes.emplace_back();
    TreeBuilder builder{features, labels, num_classes, params.max_depth, std::max(1, params.min_leaf),
                        mtry, rng, tree};
    builder.build(sample, 0, 0);

    tree.leaf_of.resize(n);
    for (std::size_t i = 0; i < n; ++i) tree.leaf_of[i] = tree.route(features.row(i));
    return tree;
}

}  // namespace

Forest fit_forest(const RowMatrix& features, const std::vector<int>& labels, int num_classes,
                  const ForestParams& params) {
    if (features.rows < 2) throw DataError("fit_forest: need at least 2 instances");
    if (features.cols < 1) throw DataError("fit_forest: need at least 1 feature");
    if (labels.size() != features.rows) throw DataError("fit_forest: labels size mismatch");
    if (params.num_trees <= 0) throw UsageError("fit_forest: num_trees must be positive");
    for (double v : features.data)
        if (!std::isfinite(v)) throw DataError("fit_forest: non-finite feature value");

    Forest forest;
    forest.params = params;
    forest.train_labels = labels;
    forest.num_classes = num_classes;
    forest.num_features = features.cols;
    forest.num_train = features.rows;
    forest.single_class =
        std::all_of(labels.begin(), labels.end(), [&](int y) { return y == labels.front(); });

    forest.trees.reserve(static_cast<std::size_t>(params.num_trees));
    for (int t = 0; t < params.num_trees; ++t)
        forest.trees.push_back(
            fit_tree(features, labels, num_classes, params, mix_seed(params.seed, static_cast<std::uint64_t>(t))));

    forest.oob_trees.assign(features.rows, {});
    for (int t = 0; t < params.num_trees; ++t)
        for (std::size_t i = 0; i < features.rows; ++i)
            if (forest.trees[static_cast<std::size_t>(t)].in_bag_counts[i] == 0)
                forest.oob_trees[i].push_back(t);
    return forest;
}

namespace {

// Accumulate c_j(t)/|M| over a set of trees given the query's leaf per tree.
std::vector<std::pair<int, double>> accumulate_row(const Forest& forest,
                                                   const std::vector<std::pair<int, int>>& tree_leaf,
                                                   std::vector<double>& buffer,
                                                   std::vector<int>& touched) {
    touched.clear();
    for (const auto& [t, leaf_id] : tree_leaf) {
        const LeafInfo& leaf = forest.trees[static_cast<std::size_t>(t)].leaves[static_cast<std::size_t>(leaf_id)];
        const double inv = 1.0 / static_cast<double>(leaf.total);
        for (const auto& [j, c] : leaf.members) {
            if (buffer[static_cast<std::size_t>(j)] == 0.0) touched.push_back(j);
            buffer[static_cast<std::size_t>(j)] += static_cast<double>(c) * inv;
        }
    }
    const double inv_trees = 1.0 / static_cast<double>(tree_leaf.size());
    std::sort(touched.begin(), touched.end());
    std::vector<std::pair<int, double>> row;
    row.reserve(touched.size());
    for (int j : touched) {
        row.emplace_back(j, buffer[static_cast<std::size_t>(j)] * inv_trees);
        buffer[static_cast<std::size_t>(j)] = 0.0;
    }
    return row;
}

}  // namespace

ProximityMatrix gap_proximities(const Forest& forest) {
    ProximityMatrix prox;
    prox.kind = ProximityMatrix::Kind::train_oob;
    prox.num_train = forest.num_train;
    prox.rows.resize(forest.num_train);
    prox.defined.assign(forest.num_train, 1);

    std::vector<double> buffer(forest.num_train, 0.0);
    std::vector<int> touched;
    std::vector<std::pair<int, int>> tree_leaf;
    for (std::size_t i = 0; i < forest.num_train; ++i) {
        if (forest.oob_trees[i].empty()) {
            prox.defined[i] = 0;
            continue;
        }
        tree_leaf.clear();
        for (int t : forest.oob_trees[i])
            tree_leaf.emplace_back(t, forest.trees[static_cast<std::size_t>(t)].leaf_of[i]);
        prox.rows[i] = accumulate_row(forest, tree_leaf, buffer, touched);
    }
    return prox;
}

ProximityMatrix gap_proximities_test(const Forest& forest, const RowMatrix& test_features) {
    if (test_features.cols != forest.num_features)
        throw DataError("gap_proximities_test: feature dimension mismatch");
    ProximityMatrix prox;
    prox.kind = ProximityMatrix::Kind::test;
    prox.num_train = forest.num_train;
    prox.rows.resize(test_features.rows);
    prox.defined.assign(test_features.rows, 1);

    std::vector<double> buffer(forest.num_train, 0.0);
    std::vector<int> touched;
    std::vector<std::pair<int, int>> tree_leaf;
    for (std::size_t m = 0; m < test_features.rows; ++m) {
        tree_leaf.clear();
        for (std::size_t t = 0; t < forest.trees.size(); ++t)
            tree_leaf.emplace_back(static_cast<int>(t), forest.trees[t].route(test_features.row(m)));
        prox.rows[m] = accumulate_row(forest, tree_leaf, buffer, touched);
    }
    return prox;
}

RowMatrix classic_proximity(const Forest& forest) {
    const std::size_t n = forest.num_train;
    RowMatrix prox(n, n, 0.0);
    for (const Tree& tree : forest.trees)
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (tree.leaf_of[a] == tree.leaf_of[b]) prox.at(a, b) += 1.0;
    const double inv = 1.0 / static_cast<double>(forest.trees.size());
    for (double& v : prox.data) v *= inv;
    return prox;
}

namespace {

int argmax_lowest(const std::vector<double>& scores) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(scores.size()); ++c)
        if (scores[static_cast<std::size_t>(c)] > scores[static_cast<std::size_t>(best)]) best = c;
    return best;
}

}  // namespace

std::vector<std::optional<int>> oob_predict(const Forest& forest) {
    std::vector<std::optional<int>> out(forest.num_train);
    std::vector<double> scores;
    for (std::size_t i = 0; i < forest.num_train; ++i) {
        if (forest.oob_trees[i].empty()) continue;
        scores.assign(static_cast<std::size_t>(forest.num_classes), 0.0);
        for (int t : forest.oob_trees[i]) {
            const Tree& tree = forest.trees[static_cast<std::size_t>(t)];
            const LeafInfo& leaf = tree.leaves[static_cast<std::size_t>(tree.leaf_of[i])];
            for (int c = 0; c < forest.num_classes; ++c)
                scores[static_cast<std::size_t>(c)] +=
                    leaf.class_mass[static_cast<std::size_t>(c)] / static_cast<double>(leaf.total);
        }
        out[i] = argmax_lowest(scores);
    }
    return out;
}

std::vector<std::vector<double>> predict_proba(const Forest& forest, const RowMatrix& features) {
    if (features.cols != forest.num_features) throw DataError("predict: feature dimension mismatch");
    std::vector<std::vector<double>> out(features.rows);
    for (std::size_t m = 0; m < features.rows; ++m) {
        std::vector<double> scores(static_cast<std::size_t>(forest.num_classes), 0.0);
        for (const Tree& tree : forest.trees) {
            const LeafInfo& leaf = tree.leaves[static_cast<std::size_t>(tree.route(features.row(m)))];
            for (int c = 0; c < forest.num_classes; ++c)
                scores[static_cast<std::size_t>(c)] +=
                    leaf.class_mass[static_cast<std::size_t>(c)] / static_cast<double>(leaf.total);
        }
        const double inv = 1.0 / static_cast<double>(forest.trees.size());
        for (double& s : scores) s *= inv;
        out[m] = std::move(scores);
    }
    return out;
}

std::vector<int> predict(const Forest& forest, const RowMatrix& features) {
    auto proba = predict_proba(forest, features);
    std::vector<int> out(proba.size());
    for (std::size_t m = 0; m < proba.size(); ++m) out[m] = argmax_lowest(proba[m]);
    return out;
}

}  // namespace tsgap
