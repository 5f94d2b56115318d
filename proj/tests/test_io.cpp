#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tsgap/io.hpp"

using namespace tsgap;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& name) : path(fs::temp_directory_path() / name) {}
    ~TempFile() { std::error_code ec; fs::remove(path, ec); }
    std::string str() const { return path.string(); }
    void write(const std::string& content) {
        std::ofstream out(path);
        out << content;
    }
};

}  // namespace

TEST_CASE("format_double round-trips exactly") {
    for (const double v : {0.1, -1.0 / 3.0, 1e300, -2.5e-17, 0.0, 42.0}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(format_double(std::nan("")) == "NaN");
}

TEST_CASE("a two-line tsv parses into shape, mask and label dictionary") {
    TempFile f("tsgap_two_line.tsv");
    f.write("1\t0.5\t0.7\n2\t0.1\tNaN\n");
    const auto d = read_ucr_tsv(f.str());
    CHECK(d.num_instances() == 2);
    CHECK(d.series_length() == 2);
    CHECK(d.num_features() == 1);
    CHECK(d.missing_count() == 1);
    CHECK(d.is_missing(1, 0, 1));
    CHECK(d.labels == std::vector<int>{0, 1});
    CHECK(d.label_names == std::vector<std::string>{"1", "2"});
    CHECK(d.value(0, 0, 0) == 0.5);
    CHECK(d.value(1, 0, 0) == 0.1);
}

TEST_CASE("empty files and malformed rows are rejected with context") {
    TempFile empty("tsgap_empty.tsv");
    empty.write("");
    CHECK_THROWS_AS(read_ucr_tsv(empty.str()), DataError);

    TempFile ragged("tsgap_ragged.tsv");
    ragged.write("1\t0.5\t0.7\n2\t0.1\n");
    try {
        read_ucr_tsv(ragged.str());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);  // line number
    }

    TempFile garbage("tsgap_garbage.tsv");
    garbage.write("1\t0.5\tpotato\n");
    CHECK_THROWS_AS(read_ucr_tsv(garbage.str()), DataError);
}

TEST_CASE("ucr tsv write/read round-trips values and mask bit-exactly") {
    auto d = oracle::make_panel(7, 11, 19);
    d.set_missing(2, 0, 3, true);
    d.set_missing(6, 0, 0, true);
    TempFile f("tsgap_roundtrip.tsv");
    write_dataset(d, f.str(), DatasetFormat::ucr_tsv);
    const auto back = read_ucr_tsv(f.str());
    CHECK(back.raw_mask() == d.raw_mask());
    for (std::size_t n = 0; n < 7; ++n)
        for (std::size_t t = 0; t < 11; ++t)
            if (!d.is_missing(n, 0, t)) CHECK(back.value(n, 0, t) == d.value(n, 0, t));
}

TEST_CASE("long csv supports multichannel panels and round-trips") {
    TimeSeriesDataset d(3, 2, 4);
    d.labels = {0, 1, 0};
    d.num_classes = 2;
    d.label_names = {"x", "y"};
    d.schema = FeatureSchema::all_continuous(2);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(-5.0, 5.0);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t t = 0; t < 4; ++t) d.set_value(n, j, t, unit(rng));
    d.set_missing(1, 1, 2, true);
    TempFile f("tsgap_long.csv");
    write_dataset(d, f.str(), DatasetFormat::csv_long);
    const auto back = read_csv_long(f.str());
    CHECK(back.num_features() == 2);
    CHECK(back.raw_mask() == d.raw_mask());
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t t = 0; t < 4; ++t)
                if (!d.is_missing(n, j, t)) CHECK(back.value(n, j, t) == d.value(n, j, t));
    CHECK(back.label_names == d.label_names);
}

TEST_CASE("removal logs round-trip through csv") {
    const std::vector<Removal> log{{0, 0, 3, 1.25}, {4, 1, 0, -0.75}, {2, 0, 7, 1.0 / 3.0}};
    TempFile f("tsgap_log.csv");
    write_removal_log(log, f.str());
    const auto back = read_removal_log(f.str());
    REQUIRE(back.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(back[i].instance == log[i].instance);
        CHECK(back[i].feature == log[i].feature);
        CHECK(back[i].time == log[i].time);
        CHECK(back[i].value == log[i].value);
    }
}

TEST_CASE("a minimal config is accepted with defaults") {
    TempFile f("tsgap_min_config.json");
    f.write(R"({"datasets": ["d"], "methods": ["mean"], "mechanisms": ["MCAR"], "rates": [0.25], "seeds": [0]})");
    const auto cfg = read_config(f.str());
    CHECK(cfg.datasets == std::vector<std::string>{"d"});
    CHECK(cfg.methods == std::vector<std::string>{"mean"});
    CHECK(cfg.standardize);
    CHECK(cfg.classifier_knn_k == 1);
}

TEST_CASE("config bounds violations name the offending field") {
    TempFile f("tsgap_bad_rate.json");
    f.write(R"({"datasets": ["d"], "methods": ["mean"], "rates": [1.5]})");
    try {
        read_config(f.str());
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("rates[0]") != std::string::npos);
    }
}

TEST_CASE("unknown config keys are rejected and every error is listed") {
    TempFile f("tsgap_unknown_key.json");
    f.write(R"({"datasets": ["d"], "methods": ["mean"], "rates": [2.0], "surprise": 1})");
    try {
        read_config(f.str());
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("surprise") != std::string::npos);
        CHECK(msg.find("rates[0]") != std::string::npos);  // both problems reported at once
    }
}

TEST_CASE("unknown methods in a config are rejected by name") {
    TempFile f("tsgap_bad_method.json");
    f.write(R"({"datasets": ["d"], "methods": ["zap"]})");
    CHECK_THROWS_AS(read_config(f.str()), UsageError);
}

TEST_CASE("configs round-trip through write_config") {
    BenchmarkConfig cfg;
    cfg.datasets = {"a", "b"};
    cfg.methods = {"mean", "gap_raw"};
    cfg.mechanisms = {"MNAR"};
    cfg.rates = {0.05, 0.5};
    cfg.seeds = {7};
    cfg.imputer.gap.max_iters = 3;
    TempFile f("tsgap_config_roundtrip.json");
    write_config(cfg, f.str());
    const auto back = read_config(f.str());
    CHECK(back.datasets == cfg.datasets);
    CHECK(back.methods == cfg.methods);
    CHECK(back.mechanisms == cfg.mechanisms);
    CHECK(back.rates == cfg.rates);
    CHECK(back.imputer.gap.max_iters == 3);
}

TEST_CASE("proximity matrices export as sparse triplets") {
    ProximityMatrix prox;
    prox.kind = ProximityMatrix::Kind::train_oob;
    prox.num_train = 3;
    prox.rows = {{{1, 0.5}, {2, 0.5}}, {}, {{0, 1.0}}};
    prox.defined = {1, 0, 1};
    TempFile f("tsgap_prox.csv");
    write_proximity_csv(prox, f.str());
    std::ifstream in(f.path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "row,col,weight");
    std::string line;
    std::size_t count = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++count;
    CHECK(count == 3);
}
