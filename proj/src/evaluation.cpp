#include "tsgap/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tsgap/transforms.hpp"

namespace tsgap {

using nlohmann::json;

std::string BenchmarkRecord::key() const {
    return dataset + "|" + mechanism + "|" + format_double(rate) + "|" + method + "|" + std::to_string(seed);
}

void BenchmarkReport::sort_canonical() {
    std::sort(records.begin(), records.end(),
              [](const BenchmarkRecord& a, const BenchmarkRecord& b) { return a.key() < b.key(); });
}

std::map<std::string, double> average_ranks(
    const std::map<std::string, std::map<std::string, double>>& scores_by_method, bool higher_is_better,
    std::vector<std::string>* warnings) {
    std::set<std::string> datasets;
    for (const auto& [method, per_dataset] : scores_by_method)
        for (const auto& [ds, _] : per_dataset) datasets.insert(ds);

    std::map<std::string, double> rank_sum;
    std::map<std::string, std::size_t> rank_count;
    for (const std::string& ds : datasets) {
        std::vector<std::pair<double, std::string>> entries;
        for (const auto& [method, per_dataset] : scores_by_method) {
            const auto it = per_dataset.find(ds);
            if (it == per_dataset.end()) {
                if (warnings)
                    warnings->push_back("missing cell: method '" + method + "' on dataset '" + ds +
                                        "'; ranked pairwise-complete");
                continue;
            }
            entries.emplace_back(it->second, method);
        }
        std::sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) return higher_is_better ? a.first > b.first : a.first < b.first;
            return a.second < b.second;
        });
        // mean rank across ties
        std::size_t i = 0;
        while (i < entries.size()) {
            std::size_t j = i;
            while (j + 1 < entries.size() && entries[j + 1].first == entries[i].first) ++j;
            const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) {
                rank_sum[entries[k].second] += mean_rank;
                rank_count[entries[k].second] += 1;
            }
            i = j + 1;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [method, sum] : rank_sum) out[method] = sum / static_cast<double>(rank_count[method]);
    return out;
}

// ---- report serialization ----------------------------------------------------

namespace {

constexpr const char* kReportHeader =
    "dataset,mechanism,rate,method,seed,rmse,rf_accuracy,knn_accuracy,best_internal,best_iteration,"
    "corrupt_seconds,impute_seconds,classify_seconds,error";

std::string record_to_csv(const BenchmarkRecord& r) {
    std::ostringstream out;
    out << r.dataset << ',' << r.mechanism << ',' << format_double(r.rate) << ',' << r.method << ','
        << r.seed << ',' << format_double(r.rmse) << ',' << format_double(r.rf_accuracy) << ','
        << format_double(r.knn_accuracy) << ',' << format_double(r.best_internal) << ',' << r.best_iteration
        << ',' << format_double(r.corrupt_seconds) << ',' << format_double(r.impute_seconds) << ','
        << format_double(r.classify_seconds) << ',' << r.error;
    return out.str();
}

json record_to_json(const BenchmarkRecord& r) {
    return json{{"dataset", r.dataset},
                {"mechanism", r.mechanism},
                {"rate", r.rate},
                {"method", r.method},
                {"seed", r.seed},
                {"rmse", r.rmse},
                {"rf_accuracy", r.rf_accuracy},
                {"knn_accuracy", r.knn_accuracy},
                {"best_internal", r.best_internal},
                {"best_iteration", r.best_iteration},
                {"corrupt_seconds", r.corrupt_seconds},
                {"impute_seconds", r.impute_seconds},
                {"classify_seconds", r.classify_seconds},
                {"error", r.error}};
}

BenchmarkRecord record_from_json(const json& j) {
    BenchmarkRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.mechanism = j.at("mechanism").get<std::string>();
    r.rate = j.at("rate").get<double>();
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    auto num = [&](const char* k) { return j.at(k).is_null() ? std::nan("") : j.at(k).get<double>(); };
    r.rmse = num("rmse");
    r.rf_accuracy = num("rf_accuracy");
    r.knn_accuracy = num("knn_accuracy");
    r.best_internal = num("best_internal");
    r.best_iteration = j.at("best_iteration").get<int>();
    r.corrupt_seconds = num("corrupt_seconds");
    r.impute_seconds = num("impute_seconds");
    r.classify_seconds = num("classify_seconds");
    r.error = j.at("error").get<std::string>();
    return r;
}

}  // namespace

void write_report_csv(const BenchmarkReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << kReportHeader << '\n';
    for (const BenchmarkRecord& r : report.records) out << record_to_csv(r) << '\n';
}

void write_report_json(const BenchmarkReport& report, const std::string& path) {
    json arr = json::array();
    for (const BenchmarkRecord& r : report.records) arr.push_back(record_to_json(r));
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << arr.dump(2) << "\n";
}

BenchmarkReport read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader)
        throw DataError("report: unexpected header in " + path);
    BenchmarkReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> tok;
        std::string t;
        std::istringstream ss(line);
        while (std::getline(ss, t, ',')) tok.push_back(t);
        while (tok.size() < 14) tok.emplace_back();  // trailing empty error column
        BenchmarkRecord r;
        r.dataset = tok[0];
        r.mechanism = tok[1];
        r.rate = std::stod(tok[2]);
        r.method = tok[3];
        r.seed = std::stoull(tok[4]);
        auto num = [](const std::string& s) { return s == "NaN" ? std::nan("") : std::stod(s); };
        r.rmse = num(tok[5]);
        r.rf_accuracy = num(tok[6]);
        r.knn_accuracy = num(tok[7]);
        r.best_internal = num(tok[8]);
        r.best_iteration = std::stoi(tok[9]);
        r.corrupt_seconds = num(tok[10]);
        r.impute_seconds = num(tok[11]);
        r.classify_seconds = num(tok[12]);
        r.error = tok[13];
        report.records.push_back(std::move(r));
    }
    return report;
}

// ---- benchmark runner ----------------------------------------------------------

namespace {

struct LoadedDataset {
    TimeSeriesDataset train;
    TimeSeriesDataset test;
};

LoadedDataset load_benchmark_dataset(const BenchmarkConfig& cfg, const std::string& name,
                                     std::uint64_t seed) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.data_dir);
    const fs::path train_path = dir / (name + "_TRAIN.tsv");
    const fs::path test_path = dir / (name + "_TEST.tsv");
    if (fs::exists(train_path)) {
        LoadedDataset out;
        out.train = read_ucr_tsv(train_path.string());
        if (fs::exists(test_path)) {
            out.test = read_ucr_tsv(test_path.string());
            return out;
        }
        auto split = train_test_split(out.train, cfg.test_fraction, mix_seed(seed, "split-" + name));
        return {std::move(split.train), std::move(split.test)};
    }
    fs::path single = dir / (name + ".tsv");
    if (!fs::exists(single) && fs::exists(name)) single = name;
    if (!fs::exists(single)) throw DataError("dataset '" + name + "' not found under " + cfg.data_dir);
    const TimeSeriesDataset whole = read_ucr_tsv(single.string());
    auto split = train_test_split(whole, cfg.test_fraction, mix_seed(seed, "split-" + name));
    return {std::move(split.train), std::move(split.test)};
}

struct Cell {
    std::string dataset;
    std::string mechanism;
    double rate;
    std::string method;
    std::uint64_t seed;
};

BenchmarkRecord run_cell(const BenchmarkConfig& cfg, const Cell& cell) {
    using clock = std::chrono::steady_clock;
    BenchmarkRecord rec;
    rec.dataset = cell.dataset;
    rec.mechanism = cell.mechanism;
    rec.rate = cell.rate;
    rec.method = cell.method;
    rec.seed = cell.seed;
    try {
        LoadedDataset data = load_benchmark_dataset(cfg, cell.dataset, cell.seed);
        if (cfg.standardize) {
            data.train = standardize(data.train).first;
            data.test = standardize(data.test).first;
        }

        // the corruption seed ignores the method so every method sees the
        // same removal pattern
        const std::string corr_tag = cell.dataset + "|" + cell.mechanism + "|" + format_double(cell.rate);
        CorruptionSpec spec;
        spec.mechanism = mechanism_from_string(cell.mechanism);
        spec.rate = cell.rate;
        spec.lag = cfg.corruption_lag;
        spec.threshold_percentile = cfg.threshold_percentile;
        spec.global_threshold = cfg.global_threshold;

        const auto t0 = clock::now();
        spec.seed = mix_seed(cell.seed, "corrupt-train|" + corr_tag);
        CorruptionResult train_corrupt = apply_corruption(data.train, spec);
        spec.seed = mix_seed(cell.seed, "corrupt-test|" + corr_tag);
        CorruptionResult test_corrupt = apply_corruption(data.test, spec);
        const auto t1 = clock::now();

        ImputerConfig icfg = cfg.imputer;
        icfg.gap.forest.seed = mix_seed(cell.seed, "impute|" + corr_tag + "|" + cell.method);
        auto imputer = make_imputer(cell.method, icfg);
        const TimeSeriesDataset imputed_train = imputer->fit_transform(train_corrupt.data);
        const TimeSeriesDataset imputed_test = imputer->transform(test_corrupt.data);
        const auto t2 = clock::now();

        rec.rmse = train_corrupt.log.empty() ? std::nan("") : rmse_at_removed(imputed_train, train_corrupt.log);
        if (const auto* gap = dynamic_cast<const GapImputer*>(imputer.get())) {
            rec.best_iteration = gap->best_iteration();
            for (const IterationDiagnostics& d : gap->diagnostics())
                if (d.iteration == rec.best_iteration) rec.best_internal = d.aggregate;
        }

        const RowMatrix train_features = raw_transform(imputed_train);
        const RowMatrix test_features = raw_transform(imputed_test);
        ForestParams rf = cfg.classifier_forest;
        rf.seed = mix_seed(cell.seed, "classify|" + corr_tag + "|" + cell.method);
        const Forest forest =
            fit_forest(train_features, imputed_train.labels, imputed_train.num_classes, rf);
        rec.rf_accuracy = accuracy(imputed_test.labels, predict(forest, test_features));
        rec.knn_accuracy = accuracy(
            imputed_test.labels,
            knn_classify(train_features, imputed_train.labels, test_features, cfg.classifier_knn_k));
        const auto t3 = clock::now();

        const auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
        rec.corrupt_seconds = secs(t0, t1);
        rec.impute_seconds = secs(t1, t2);
        rec.classify_seconds = secs(t2, t3);
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.rmse = rec.rf_accuracy = rec.knn_accuracy = std::nan("");
    }
    return rec;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg, const std::string& out_dir, int jobs,
                              bool resume, std::function<void(const std::string&)> progress) {
    namespace fs = std::filesystem;
    if (cfg.datasets.empty() || cfg.mechanisms.empty() || cfg.rates.empty() || cfg.methods.empty() ||
        cfg.seeds.empty())
        throw UsageError("benchmark: every grid axis needs at least one entry");
    fs::create_directories(out_dir);
    const fs::path records_path = fs::path(out_dir) / "records.jsonl";

    std::map<std::string, BenchmarkRecord> done;
    if (resume && fs::exists(records_path)) {
        std::ifstream in(records_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            BenchmarkRecord r = record_from_json(json::parse(line));
            done[r.key()] = std::move(r);
        }
    }

    std::vector<Cell> cells;
    for (const auto& ds : cfg.datasets)
        for (const auto& mech : cfg.mechanisms)
            for (double rate : cfg.rates)
                for (const auto& method : cfg.methods)
                    for (std::uint64_t seed : cfg.seeds) cells.push_back({ds, mech, rate, method, seed});

    std::vector<BenchmarkRecord> results(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;
    std::ofstream records_out(records_path, std::ios::app);

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            BenchmarkRecord rec;
            rec.dataset = cell.dataset;
            rec.mechanism = cell.mechanism;
            rec.rate = cell.rate;
            rec.method = cell.method;
            rec.seed = cell.seed;
            const auto it = done.find(rec.key());
            const bool cached = it != done.end();
            rec = cached ? it->second : run_cell(cfg, cell);
            {
                std::lock_guard<std::mutex> lock(io_mutex);
                if (!cached) records_out << record_to_json(rec).dump() << "\n" << std::flush;
                if (progress)
                    progress((cached ? "skipped " : "done ") + rec.key() +
                             (rec.error.empty() ? "" : " [error: " + rec.error + "]"));
            }
            results[i] = std::move(rec);
        }
    };

    const int workers = std::max(1, jobs);
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    BenchmarkReport report;
    report.records = std::move(results);
    report.sort_canonical();
    write_report_csv(report, (fs::path(out_dir) / "report.csv").string());
    write_report_json(report, (fs::path(out_dir) / "report.json").string());
    return report;
}

// ---- rank tables -----------------------------------------------------------------

std::vector<RankTable> rank_tables(const BenchmarkReport& report) {
    struct Axis {
        const char* metric;
        bool higher_better;
    };
    const Axis axes[] = {{"rmse", false}, {"rf_accuracy", true}, {"knn_accuracy", true}};

    std::set<std::pair<std::string, double>> groups;
    for (const auto& r : report.records) groups.insert({r.mechanism, r.rate});

    std::vector<RankTable> tables;
    for (const auto& [mech, rate] : groups) {
        for (const Axis& axis : axes) {
            // mean over seeds per (method, dataset)
            std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
            for (const auto& r : report.records) {
                if (r.mechanism != mech || r.rate != rate || !r.error.empty()) continue;
                const double v = axis.metric == std::string("rmse") ? r.rmse
                                 : axis.metric == std::string("rf_accuracy") ? r.rf_accuracy
                                                                             : r.knn_accuracy;
                if (std::isnan(v)) continue;
                auto& slot = acc[r.method][r.dataset];
                slot.first += v;
                slot.second += 1;
            }
            std::map<std::string, std::map<std::string, double>> scores;
            for (const auto& [method, per_ds] : acc)
                for (const auto& [ds, sum_count] : per_ds)
                    scores[method][ds] = sum_count.first / static_cast<double>(sum_count.second);
            if (scores.empty()) continue;
            RankTable table;
            table.mechanism = mech;
            table.rate = rate;
            table.metric = axis.metric;
            table.mean_rank = average_ranks(scores, axis.higher_better, &table.warnings);
            tables.push_back(std::move(table));
        }
    }
    return tables;
}

std::string render_rank_tables_csv(const std::vector<RankTable>& tables) {
    std::ostringstream out;
    out << "mechanism,rate,metric,method,mean_rank\n";
    for (const RankTable& t : tables)
        for (const auto& [method, rank] : t.mean_rank)
            out << t.mechanism << ',' << format_double(t.rate) << ',' << t.metric << ',' << method << ','
                << format_double(rank) << '\n';
    return out.str();
}

std::string render_rank_tables_markdown(const std::vector<RankTable>& tables) {
    std::ostringstream out;
    for (const RankTable& t : tables) {
        out << "## " << t.mechanism << " @ " << format_double(t.rate) << " — " << t.metric << "\n\n";
        out << "| method | mean rank |\n|---|---|\n";
        std::vector<std::pair<double, std::string>> sorted;
        for (const auto& [method, rank] : t.mean_rank) sorted.emplace_back(rank, method);
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [rank, method] : sorted) out << "| " << method << " | " << format_double(rank) << " |\n";
        out << "\n";
    }
    return out.str();
}

}  // namespace tsgap
