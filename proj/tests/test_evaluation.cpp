#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "tsgap/evaluation.hpp"

using namespace tsgap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        std::error_code ec;
        fs::remove_all(path, ec);
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
    std::string str() const { return path.string(); }
};

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// A small synthetic classification dataset written in the archive layout so
// the benchmark can load it by name.
void write_toy_dataset(const fs::path& dir, const std::string& name, std::uint64_t seed) {
    const auto d = oracle::make_panel(24, 12, seed);
    write_dataset(d, (dir / (name + ".tsv")).string(), DatasetFormat::ucr_tsv);
}

BenchmarkConfig toy_config(const std::string& data_dir) {
    BenchmarkConfig cfg;
    cfg.datasets = {"toy"};
    cfg.data_dir = data_dir;
    cfg.mechanisms = {"MCAR"};
    cfg.rates = {0.2};
    cfg.methods = {"mean", "linear"};
    cfg.seeds = {1};
    cfg.classifier_forest.num_trees = 25;
    return cfg;
}

BenchmarkRecord record(const std::string& ds, const std::string& method, double rmse, double rf) {
    BenchmarkRecord r;
    r.dataset = ds;
    r.mechanism = "MCAR";
    r.rate = 0.25;
    r.method = method;
    r.seed = 0;
    r.rmse = rmse;
    r.rf_accuracy = rf;
    r.knn_accuracy = rf;
    return r;
}

}  // namespace

TEST_CASE("a method that wins every dataset gets mean rank 1") {
    std::map<std::string, std::map<std::string, double>> scores;
    for (const std::string ds : {"a", "b", "c"}) {
        scores["best"][ds] = 0.9;
        scores["mid"][ds] = 0.5;
        scores["worst"][ds] = 0.1;
    }
    const auto ranks = average_ranks(scores, /*higher_is_better=*/true);
    CHECK(ranks.at("best") == doctest::Approx(1.0));
    CHECK(ranks.at("mid") == doctest::Approx(2.0));
    CHECK(ranks.at("worst") == doctest::Approx(3.0));
}

TEST_CASE("tied scores share the mean of their rank positions") {
    std::map<std::string, std::map<std::string, double>> scores;
    scores["p"]["d1"] = 0.7;
    scores["q"]["d1"] = 0.7;
    const auto ranks = average_ranks(scores, true);
    CHECK(ranks.at("p") == doctest::Approx(1.5));
    CHECK(ranks.at("q") == doctest::Approx(1.5));
}

TEST_CASE("average ranks match a hand-ranked table and respect direction") {
    // rmse-style scores (lower is better)
    std::map<std::string, std::map<std::string, double>> scores;
    //            d1   d2   d3   d4
    // m1 ranks:  1    2    3    1
    // m2 ranks:  2    1    1    2.5   (ties with m3 on d4)
    // m3 ranks:  3    3    2    2.5
    scores["m1"] = {{"d1", 1.0}, {"d2", 2.0}, {"d3", 3.0}, {"d4", 1.0}};
    scores["m2"] = {{"d1", 2.0}, {"d2", 1.0}, {"d3", 1.0}, {"d4", 2.0}};
    scores["m3"] = {{"d1", 3.0}, {"d2", 3.0}, {"d3", 2.0}, {"d4", 2.0}};
    const auto ranks = average_ranks(scores, /*higher_is_better=*/false);
    CHECK(ranks.at("m1") == doctest::Approx((1.0 + 2.0 + 3.0 + 1.0) / 4.0));
    CHECK(ranks.at("m2") == doctest::Approx((2.0 + 1.0 + 1.0 + 2.5) / 4.0));
    CHECK(ranks.at("m3") == doctest::Approx((3.0 + 3.0 + 2.0 + 2.5) / 4.0));
}

TEST_CASE("per-dataset ranks always sum to m(m+1)/2") {
    std::map<std::string, std::map<std::string, double>> scores;
    scores["a"]["d"] = 0.3;
    scores["b"]["d"] = 0.3;
    scores["c"]["d"] = 0.9;
    scores["e"]["d"] = 0.1;
    const auto ranks = average_ranks(scores, true);
    double total = 0.0;
    for (const auto& [m, r] : ranks) total += r;
    CHECK(total == doctest::Approx(4.0 * 5.0 / 2.0));
}

TEST_CASE("methods missing a dataset rank pairwise-complete with a warning") {
    std::map<std::string, std::map<std::string, double>> scores;
    scores["full"] = {{"d1", 0.9}, {"d2", 0.9}};
    scores["partial"] = {{"d1", 0.5}};
    std::vector<std::string> warnings;
    const auto ranks = average_ranks(scores, true, &warnings);
    CHECK(ranks.at("full") == doctest::Approx(1.0));
    CHECK(ranks.at("partial") == doctest::Approx(2.0));
    CHECK_FALSE(warnings.empty());
}

TEST_CASE("reports round-trip through csv byte-identically") {
    BenchmarkReport report;
    report.records.push_back(record("zoo", "mean", 0.5, 0.75));
    report.records.push_back(record("ant", "gap_raw", 1.0 / 3.0, 0.875));
    report.records.back().best_internal = 0.91;
    report.records.back().best_iteration = 2;
    BenchmarkRecord failed = record("ant", "spline", std::numeric_limits<double>::quiet_NaN(), 0.0);
    failed.error = "boom";
    report.records.push_back(failed);
    report.sort_canonical();

    TempDir dir("tsgap_report_roundtrip");
    const fs::path first = dir.path / "report.csv";
    const fs::path second = dir.path / "again.csv";
    write_report_csv(report, first.string());
    auto back = read_report_csv(first.string());
    write_report_csv(back, second.string());
    CHECK(file_bytes(first) == file_bytes(second));
    REQUIRE(back.records.size() == 3);
    CHECK(std::isnan(back.records[1].rmse));  // canonical order: ant/spline is second
    CHECK(back.records[1].error == "boom");
}

TEST_CASE("a 1x1x1x2x1 grid produces one record per method") {
    TempDir data("tsgap_bench_data");
    TempDir out("tsgap_bench_out");
    write_toy_dataset(data.path, "toy", 5);
    const auto report = run_benchmark(toy_config(data.str()), out.str(), 1, false);
    REQUIRE(report.records.size() == 2);
    for (const auto& r : report.records) {
        CHECK(r.error.empty());
        CHECK(r.rmse >= 0.0);
        CHECK(r.rf_accuracy >= 0.0);
        CHECK(r.rf_accuracy <= 1.0);
        CHECK(r.knn_accuracy >= 0.0);
        CHECK(r.knn_accuracy <= 1.0);
    }
    CHECK(fs::exists(out.path / "report.csv"));
    CHECK(fs::exists(out.path / "report.json"));
}

TEST_CASE("resuming an already complete run recomputes nothing") {
    TempDir data("tsgap_resume_data");
    TempDir out("tsgap_resume_out");
    write_toy_dataset(data.path, "toy", 6);
    const auto cfg = toy_config(data.str());
    const auto first = run_benchmark(cfg, out.str(), 1, false);
    const std::string jsonl_before = file_bytes(out.path / "records.jsonl");
    const auto second = run_benchmark(cfg, out.str(), 1, true);
    CHECK(file_bytes(out.path / "records.jsonl") == jsonl_before);  // nothing appended
    REQUIRE(second.records.size() == first.records.size());
    for (std::size_t i = 0; i < first.records.size(); ++i) {
        CHECK(second.records[i].key() == first.records[i].key());
        CHECK(second.records[i].rmse == first.records[i].rmse);
        CHECK(second.records[i].rf_accuracy == first.records[i].rf_accuracy);
    }
}

TEST_CASE("worker count does not change any result column") {
    TempDir data("tsgap_jobs_data");
    write_toy_dataset(data.path, "toy", 7);
    auto cfg = toy_config(data.str());
    cfg.seeds = {1, 2};
    TempDir out1("tsgap_jobs_out1");
    TempDir out4("tsgap_jobs_out4");
    const auto serial = run_benchmark(cfg, out1.str(), 1, false);
    const auto parallel = run_benchmark(cfg, out4.str(), 4, false);
    REQUIRE(serial.records.size() == parallel.records.size());
    for (std::size_t i = 0; i < serial.records.size(); ++i) {
        CHECK(serial.records[i].key() == parallel.records[i].key());
        CHECK(serial.records[i].rmse == parallel.records[i].rmse);
        CHECK(serial.records[i].rf_accuracy == parallel.records[i].rf_accuracy);
        CHECK(serial.records[i].knn_accuracy == parallel.records[i].knn_accuracy);
        CHECK(serial.records[i].best_internal == parallel.records[i].best_internal);
        CHECK(serial.records[i].best_iteration == parallel.records[i].best_iteration);
    }
}

TEST_CASE("a missing dataset fails its cells without sinking the grid") {
    TempDir data("tsgap_missing_data");
    TempDir out("tsgap_missing_out");
    write_toy_dataset(data.path, "toy", 8);
    auto cfg = toy_config(data.str());
    cfg.datasets = {"toy", "no_such_dataset"};
    const auto report = run_benchmark(cfg, out.str(), 1, false);
    REQUIRE(report.records.size() == 4);
    int failed = 0, ok = 0;
    for (const auto& r : report.records) {
        if (r.dataset == "no_such_dataset") {
            CHECK_FALSE(r.error.empty());
            ++failed;
        } else {
            CHECK(r.error.empty());
            ++ok;
        }
    }
    CHECK(failed == 2);
    CHECK(ok == 2);
}

TEST_CASE("an empty grid axis is a usage error") {
    TempDir out("tsgap_empty_axis_out");
    BenchmarkConfig cfg = toy_config(".");
    cfg.methods.clear();
    CHECK_THROWS_AS(run_benchmark(cfg, out.str(), 1, false), UsageError);
}

TEST_CASE("rank tables rank each mechanism/rate slice per metric") {
    BenchmarkReport report;
    for (const std::string ds : {"d1", "d2"}) {
        auto good = record(ds, "good", 0.2, 0.9);
        auto bad = record(ds, "bad", 0.8, 0.6);
        report.records.push_back(good);
        report.records.push_back(bad);
    }
    const auto tables = rank_tables(report);
    REQUIRE(tables.size() == 3);  // one slice, three metrics
    for (const auto& table : tables) {
        CHECK(table.mechanism == "MCAR");
        CHECK(table.rate == 0.25);
        CHECK(table.mean_rank.at("good") == doctest::Approx(1.0));
        CHECK(table.mean_rank.at("bad") == doctest::Approx(2.0));
    }
    const std::string csv = render_rank_tables_csv(tables);
    CHECK(csv.find("mechanism,rate,metric,method,mean_rank") == 0);
    const std::string md = render_rank_tables_markdown(tables);
    CHECK(md.find("rmse") != std::string::npos);
    CHECK(md.find("good") != std::string::npos);
}

TEST_CASE("errored and NaN records are excluded from ranking") {
    BenchmarkReport report;
    report.records.push_back(record("d1", "ok", 0.3, 0.8));
    auto broken = record("d1", "broken", 0.1, 0.99);
    broken.error = "failed";
    report.records.push_back(broken);
    const auto tables = rank_tables(report);
    for (const auto& table : tables) {
        CHECK(table.mean_rank.count("broken") == 0);
        CHECK(table.mean_rank.at("ok") == doctest::Approx(1.0));
    }
}
