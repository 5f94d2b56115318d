#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tsgap/metrics.hpp"

using namespace tsgap;

TEST_CASE("rmse at removed positions") {
    auto d = oracle::make_panel(3, 5, 1);
    std::vector<Removal> log{{0, 0, 1, d.value(0, 0, 1)}, {2, 0, 4, d.value(2, 0, 4)}};

    SUBCASE("perfect imputation scores zero") { CHECK(rmse_at_removed(d, log) == 0.0); }

    SUBCASE("symmetric unit errors average to one") {
        auto imp = d;
        imp.set_value(0, 0, 1, d.value(0, 0, 1) + 1.0);
        imp.set_value(2, 0, 4, d.value(2, 0, 4) - 1.0);
        CHECK(rmse_at_removed(imp, log) == doctest::Approx(1.0));
    }

    SUBCASE("empty log is an error") {
        CHECK_THROWS_AS(rmse_at_removed(d, {}), UsageError);
    }
}

TEST_CASE("rmse over many random positions matches a two-pass oracle") {
    auto truth = oracle::make_panel(10, 20, 3);
    auto imputed = truth;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> err(-2.0, 2.0);
    std::vector<Removal> log;
    for (int k = 0; k < 50; ++k) {
        const std::size_t n = rng() % 10, t = rng() % 20;
        log.push_back({n, 0, t, truth.value(n, 0, t)});
        imputed.set_value(n, 0, t, truth.value(n, 0, t) + err(rng));
    }
    double ss = 0.0;
    for (const Removal& r : log) {
        const double e = imputed.value(r.instance, r.feature, r.time) - r.value;
        ss += e * e;
    }
    const double expected = std::sqrt(ss / static_cast<double>(log.size()));
    CHECK(rmse_at_removed(imputed, log) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("r2 conventions") {
    const std::vector<double> truth{1.0, 2.0, 3.0, 4.0};
    CHECK(r2_score(truth, truth) == doctest::Approx(1.0));
    const std::vector<double> mean_only(4, 2.5);
    CHECK(r2_score(truth, mean_only) == doctest::Approx(0.0));
    const std::vector<double> constant{3.0, 3.0, 3.0};
    CHECK(r2_score(constant, constant) == 1.0);                       // exact match
    CHECK(r2_score(constant, {3.0, 3.1, 3.0}) == 0.0);                // constant truth, off estimate
}

TEST_CASE("macro F1 against a hand-worked 3-class confusion") {
    // truth:      0 0 0 1 1 2
    // predicted:  0 1 0 1 2 2
    // class 0: tp=2 fp=0 fn=1 -> p=1, r=2/3, f1=0.8
    // class 1: tp=1 fp=1 fn=1 -> p=0.5, r=0.5, f1=0.5
    // class 2: tp=1 fp=1 fn=0 -> p=0.5, r=1, f1=2/3
    const std::vector<int> truth{0, 0, 0, 1, 1, 2};
    const std::vector<int> pred{0, 1, 0, 1, 2, 2};
    CHECK(macro_f1(truth, pred, 3) == doctest::Approx((0.8 + 0.5 + 2.0 / 3.0) / 3.0));
    CHECK(accuracy(truth, pred) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("macro F1 gives perfect predictions a score of one") {
    const std::vector<int> truth{0, 1, 2, 1, 0};
    CHECK(macro_f1(truth, truth, 3) == doctest::Approx(1.0));
    CHECK(accuracy(truth, truth) == 1.0);
}

TEST_CASE("empty classes contribute zero to macro F1") {
    const std::vector<int> truth{0, 0};
    const std::vector<int> pred{0, 0};
    CHECK(macro_f1(truth, pred, 2) == doctest::Approx(0.5));  // class 1 absent everywhere
}

TEST_CASE("1-NN returns the label of an exactly matching training point") {
    RowMatrix train(3, 2);
    train.at(0, 0) = 0.0; train.at(0, 1) = 0.0;
    train.at(1, 0) = 5.0; train.at(1, 1) = 5.0;
    train.at(2, 0) = -3.0; train.at(2, 1) = 1.0;
    RowMatrix test(1, 2);
    test.at(0, 0) = 5.0; test.at(0, 1) = 5.0;
    CHECK(knn_classify(train, {0, 1, 0}, test, 1) == std::vector<int>{1});
}

TEST_CASE("k-NN separates Gaussian blobs perfectly at high separation") {
    const auto blobs = oracle::make_blobs(60, 4, 12.0, 5);
    const auto test = oracle::make_blobs(20, 4, 12.0, 6);
    const auto pred = knn_classify(blobs.features, blobs.labels, test.features, 3);
    CHECK(accuracy(test.labels, pred) == 1.0);
}

TEST_CASE("k equal to the training size votes the majority class") {
    RowMatrix train(5, 1);
    for (std::size_t i = 0; i < 5; ++i) train.at(i, 0) = static_cast<double>(i);
    RowMatrix test(1, 1);
    test.at(0, 0) = 100.0;
    CHECK(knn_classify(train, {1, 1, 1, 0, 0}, test, 5) == std::vector<int>{1});
    // exact vote tie breaks to the lowest class index
    RowMatrix train4(4, 1);
    for (std::size_t i = 0; i < 4; ++i) train4.at(i, 0) = static_cast<double>(i);
    CHECK(knn_classify(train4, {1, 1, 0, 0}, test, 4) == std::vector<int>{0});
}

TEST_CASE("dimension mismatch is rejected") {
    RowMatrix train(2, 3), test(1, 2);
    CHECK_THROWS_AS(knn_classify(train, {0, 1}, test, 1), DataError);
}
