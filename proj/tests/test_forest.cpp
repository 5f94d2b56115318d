#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "tsgap/forest.hpp"
#include "tsgap/metrics.hpp"

using namespace tsgap;

namespace {

// Hand-assembled forests let the single-tree weight rules be checked literally.
Forest one_leaf_forest(std::size_t n, const std::vector<int>& in_bag, const std::vector<int>& labels) {
    Forest f;
    Tree tree;
    tree.nodes.emplace_back();
    tree.nodes[0].leaf_id = 0;
    LeafInfo leaf;
    for (std::size_t j = 0; j < n; ++j)
        if (in_bag[j] > 0) leaf.members.emplace_back(static_cast<int>(j), in_bag[j]);
    leaf.total = 0;
    leaf.class_mass.assign(2, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        leaf.total += in_bag[j];
        leaf.class_mass[static_cast<std::size_t>(labels[j])] += static_cast<double>(in_bag[j]);
    }
    tree.leaves.push_back(leaf);
    tree.in_bag_counts = in_bag;
    tree.leaf_of.assign(n, 0);
    f.trees.push_back(std::move(tree));
    f.train_labels = labels;
    f.num_classes = 2;
    f.num_features = 1;
    f.num_train = n;
    f.oob_trees.assign(n, {});
    for (std::size_t j = 0; j < n; ++j)
        if (in_bag[j] == 0) f.oob_trees[j].push_back(0);
    return f;
}

ForestParams small_params(int trees, std::uint64_t seed) {
    ForestParams p;
    p.num_trees = trees;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("single tree: an OOB instance splits mass by bootstrap multiplicity") {
    // leaf in-bag multiset {x1, x1, x2}; x0 is OOB and shares the leaf
    const auto f = one_leaf_forest(3, {0, 2, 1}, {0, 0, 1});
    const auto prox = gap_proximities(f);
    REQUIRE(prox.defined[0]);
    CHECK(prox.at(0, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(prox.at(0, 2) == doctest::Approx(1.0 / 3.0));
    CHECK(prox.at(0, 0) == 0.0);
    CHECK(prox.row_sum(0) == doctest::Approx(1.0));
    // in-bag instances have no OOB tree here
    CHECK_FALSE(prox.defined[1]);
    CHECK_FALSE(prox.defined[2]);
}

TEST_CASE("single tree: a test row takes the leaf cohort weights c/|M|") {
    // in-bag multiset {x3 x3 x3 x7}
    std::vector<int> in_bag(8, 0);
    in_bag[3] = 3;
    in_bag[7] = 1;
    const auto f = one_leaf_forest(8, in_bag, {0, 0, 0, 0, 1, 1, 1, 1});
    RowMatrix test(1, 1);
    test.at(0, 0) = 0.0;
    const auto prox = gap_proximities_test(f, test);
    CHECK(prox.at(0, 3) == doctest::Approx(3.0 / 4.0));
    CHECK(prox.at(0, 7) == doctest::Approx(1.0 / 4.0));
    CHECK(prox.row_sum(0) == doctest::Approx(1.0));
}

TEST_CASE("separable blobs give high OOB accuracy") {
    const auto blobs = oracle::make_blobs(80, 5, 8.0, 21);
    const auto forest = fit_forest(blobs.features, blobs.labels, 2, small_params(100, 3));
    const auto oob = oob_predict(forest);
    int correct = 0, defined = 0;
    for (std::size_t i = 0; i < oob.size(); ++i)
        if (oob[i]) {
            ++defined;
            if (*oob[i] == blobs.labels[i]) ++correct;
        }
    REQUIRE(defined > 0);
    CHECK(static_cast<double>(correct) / static_cast<double>(defined) >= 0.95);
}

TEST_CASE("an empty ensemble is rejected") {
    const auto blobs = oracle::make_blobs(10, 2, 3.0, 1);
    CHECK_THROWS_AS(fit_forest(blobs.features, blobs.labels, 2, small_params(0, 0)), UsageError);
}

TEST_CASE("identical seeds grow identical forests") {
    const auto blobs = oracle::make_blobs(40, 4, 2.0, 9);
    const auto a = fit_forest(blobs.features, blobs.labels, 2, small_params(25, 77));
    const auto b = fit_forest(blobs.features, blobs.labels, 2, small_params(25, 77));
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        CHECK(a.trees[t].in_bag_counts == b.trees[t].in_bag_counts);
        CHECK(a.trees[t].leaf_of == b.trees[t].leaf_of);
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
            CHECK(a.trees[t].nodes[k].feature == b.trees[t].nodes[k].feature);
            CHECK(a.trees[t].nodes[k].threshold == b.trees[t].nodes[k].threshold);
        }
    }
}

TEST_CASE("bootstrap counts always sum to N and map every instance to a leaf") {
    const auto blobs = oracle::make_blobs(30, 3, 1.0, 15);
    const auto forest = fit_forest(blobs.features, blobs.labels, 2, small_params(40, 5));
    for (const Tree& tree : forest.trees) {
        int total = 0;
        for (int c : tree.in_bag_counts) total += c;
        CHECK(total == 30);
        CHECK(tree.leaf_of.size() == 30);
    }
}

TEST_CASE("train proximities equal the brute-force triple-loop oracle") {
    const auto blobs = oracle::make_blobs(40, 4, 1.5, 31);
    const auto forest = fit_forest(blobs.features, blobs.labels, 2, small_params(64, 8));
    const auto fast = gap_proximities(forest);
    const auto slow = oracle::gap_proximity_train(forest);
    for (std::size_t i = 0; i < 40; ++i) {
        if (!fast.defined[i]) continue;
        for (std::size_t j = 0; j < 40; ++j)
            CHECK(std::abs(fast.at(i, j) - slow.at(i, j)) < 1e-12);
        CHECK(std::abs(fast.row_sum(i) - 1.0) < 1e-9);
        CHECK(fast.at(i, i) == 0.0);  // OOB trees have zero own multiplicity
    }
}

TEST_CASE("test proximities equal the brute-force oracle and are row-stochastic") {
    const auto train = oracle::make_blobs(30, 4, 1.5, 41);
    const auto test = oracle::make_blobs(10, 4, 1.5, 42);
    const auto forest = fit_forest(train.features, train.labels, 2, small_params(64, 8));
    const auto fast = gap_proximities_test(forest, test.features);
    const auto slow = oracle::gap_proximity_test(forest, test.features);
    for (std::size_t m = 0; m < 10; ++m) {
        for (std::size_t j = 0; j < 30; ++j)
            CHECK(std::abs(fast.at(m, j) - slow.at(m, j)) < 1e-12);
        CHECK(std::abs(fast.row_sum(m) - 1.0) < 1e-9);
    }
}

TEST_CASE("proximity weights are nonnegative") {
    const auto blobs = oracle::make_blobs(25, 3, 1.0, 51);
    const auto forest = fit_forest(blobs.features, blobs.labels, 2, small_params(30, 2));
    const auto prox = gap_proximities(forest);
    for (const auto& row : prox.rows)
        for (const auto& [j, w] : row) CHECK(w >= 0.0);
}

TEST_CASE("the GAP-weighted vote reproduces the OOB prediction") {
    const auto blobs = oracle::make_blobs(120, 4, 2.0, 61, 3);
    const auto forest = fit_forest(blobs.features, blobs.labels, 3, small_params(100, 13));
    const auto prox = gap_proximities(forest);
    const auto oob = oob_predict(forest);
    std::size_t ties = 0;
    for (std::size_t i = 0; i < 120; ++i) {
        if (!prox.defined[i]) continue;
        std::vector<double> vote(3, 0.0);
        for (const auto& [j, w] : prox.rows[i]) vote[static_cast<std::size_t>(blobs.labels[static_cast<std::size_t>(j)])] += w;
        int argmax = 0;
        bool tie = false;
        for (int c = 1; c < 3; ++c) {
            if (vote[static_cast<std::size_t>(c)] > vote[static_cast<std::size_t>(argmax)]) {
                argmax = c;
                tie = false;
            } else if (vote[static_cast<std::size_t>(c)] == vote[static_cast<std::size_t>(argmax)]) {
                tie = true;
            }
        }
        if (tie) {
            ++ties;
            continue;
        }
        REQUIRE(oob[i].has_value());
        CHECK(argmax == *oob[i]);
    }
    CHECK(static_cast<double>(ties) < 0.02 * 120.0);
}

TEST_CASE("a one-tree forest leaves in-bag instances without an OOB prediction") {
    const auto blobs = oracle::make_blobs(20, 2, 4.0, 71);
    const auto forest = fit_forest(blobs.features, blobs.labels, 2, small_params(1, 0));
    const auto oob = oob_predict(forest);
    for (std::size_t i = 0; i < 20; ++i)
        CHECK(oob[i].has_value() == (forest.trees[0].in_bag_counts[i] == 0));
}

TEST_CASE("training accuracy is at least OOB accuracy on a fully grown forest") {
    const auto blobs = oracle::make_blobs(60, 4, 2.0, 81);
    const auto forest = fit_forest(blobs.features, blobs.labels, 2, small_params(60, 4));
    const auto train_pred = predict(forest, blobs.features);
    const auto oob = oob_predict(forest);
    double train_acc = accuracy(blobs.labels, train_pred);
    int correct = 0, defined = 0;
    for (std::size_t i = 0; i < 60; ++i)
        if (oob[i]) {
            ++defined;
            correct += (*oob[i] == blobs.labels[i]) ? 1 : 0;
        }
    CHECK(train_acc >= static_cast<double>(correct) / static_cast<double>(defined));
}

TEST_CASE("classic proximity is symmetric with unit diagonal and unit duplicates") {
    auto blobs = oracle::make_blobs(20, 3, 2.0, 91);
    // duplicate instance 0 into instance 1
    for (std::size_t f = 0; f < 3; ++f) blobs.features.at(1, f) = blobs.features.at(0, f);
    blobs.labels[1] = blobs.labels[0];
    const auto forest = fit_forest(blobs.features, blobs.labels, 2, small_params(30, 6));
    const auto prox = classic_proximity(forest);
    CHECK(prox.at(0, 1) == 1.0);  // identical rows always share a leaf
    for (std::size_t a = 0; a < 20; ++a) {
        CHECK(prox.at(a, a) == 1.0);
        for (std::size_t b = 0; b < 20; ++b) {
            CHECK(prox.at(a, b) == prox.at(b, a));
            CHECK(prox.at(a, b) >= 0.0);
            CHECK(prox.at(a, b) <= 1.0);
        }
    }
}

TEST_CASE("single-class labels produce a valid flagged forest") {
    const auto blobs = oracle::make_blobs(12, 2, 1.0, 99);
    const std::vector<int> labels(12, 0);
    const auto forest = fit_forest(blobs.features, labels, 1, small_params(10, 0));
    CHECK(forest.single_class);
    const auto prox = gap_proximities(forest);
    for (std::size_t i = 0; i < 12; ++i)
        if (prox.defined[i]) CHECK(std::abs(prox.row_sum(i) - 1.0) < 1e-9);
}
