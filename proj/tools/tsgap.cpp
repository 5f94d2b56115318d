// Command-line front end: corrupt -> impute -> classify -> benchmark -> report.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsgap/dtw.hpp"
#include "tsgap/evaluation.hpp"
#include "tsgap/imputation.hpp"
#include "tsgap/io.hpp"
#include "tsgap/metrics.hpp"
#include "tsgap/transforms.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsgap;

namespace {

TimeSeriesDataset load(const std::string& path, const std::string& format) {
    return read_dataset(path, dataset_format_from_string(format));
}

void store(const TimeSeriesDataset& d, const std::string& path, const std::string& format) {
    write_dataset(d, path, dataset_format_from_string(format));
}

// Pipeline bundles carry a manifest naming the method; the forest-based
// imputers add their own state files next to it.
void save_pipeline(const std::string& dir, const std::string& method, const Imputer& imputer,
                   const ImputerConfig& cfg) {
    fs::create_directories(dir);
    json manifest{{"method", method}};
    if (const auto* gap = dynamic_cast<const GapImputer*>(&imputer)) {
        gap->save(dir);
    } else {
        manifest["baseline"] = {{"constant_value", cfg.baseline.constant_value},
                                {"knn_k", cfg.baseline.knn_k},
                                {"rolling_window", cfg.baseline.rolling_window}};
        if (cfg.baseline.dtw_band) manifest["baseline"]["dtw_band"] = *cfg.baseline.dtw_band;
    }
    std::ofstream out(fs::path(dir) / "pipeline.json");
    if (!out) throw DataError("cannot write pipeline manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

std::unique_ptr<Imputer> load_pipeline(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "pipeline.json");
    if (!in) throw DataError("no pipeline manifest in " + dir);
    const json manifest = json::parse(in);
    const std::string method = manifest.at("method").get<std::string>();
    if (method.rfind("gap_", 0) == 0) return GapImputer::load(dir);
    ImputerConfig cfg;
    if (manifest.contains("baseline")) {
        const json& b = manifest["baseline"];
        cfg.baseline.constant_value = b.value("constant_value", 0.0);
        cfg.baseline.knn_k = b.value("knn_k", 5);
        cfg.baseline.rolling_window = b.value("rolling_window", 3);
        if (b.contains("dtw_band")) cfg.baseline.dtw_band = b["dtw_band"].get<std::size_t>();
    }
    return make_imputer(method, cfg);
}

int run(int argc, char** argv) {
    CLI::App app{"Time series missing-value imputation with forest GAP proximities"};
    app.require_subcommand(1);

    // ---- corrupt ----
    auto* corrupt = app.add_subcommand("corrupt", "Remove values under MCAR, MAR, or MNAR");
    std::string c_in, c_out, c_log, c_format = "ucr_tsv", c_mechanism;
    CorruptionSpec c_spec;
    double c_removal_prob = -1.0;
    corrupt->add_option("--in", c_in, "Input dataset path")->required();
    corrupt->add_option("--format", c_format, "Dataset format: ucr_tsv or csv_long")->capture_default_str();
    corrupt->add_option("--mechanism", c_mechanism, "MCAR, MAR, or MNAR")->required();
    corrupt->add_option("--rate", c_spec.rate, "Target missing rate in (0,1)")->required();
    corrupt->add_option("--seed", c_spec.seed, "Random seed")->capture_default_str();
    corrupt->add_option("--lag", c_spec.lag, "MAR lag")->capture_default_str();
    corrupt->add_option("--percentile", c_spec.threshold_percentile, "MAR/MNAR threshold percentile")
        ->capture_default_str();
    corrupt->add_flag("--global-threshold", c_spec.global_threshold,
                      "Pool the threshold over all instances instead of per series");
    corrupt->add_option("--removal-probability", c_removal_prob,
                        "Override the calibrated eligible-entry removal probability");
    corrupt->add_option("--out", c_out, "Corrupted dataset output path")->required();
    corrupt->add_option("--log", c_log, "Removal log output path (CSV)");

    // ---- impute ----
    auto* impute = app.add_subcommand("impute", "Fit an imputer on a dataset and fill its gaps");
    std::string i_in, i_out, i_method, i_config, i_pipeline_out, i_format = "ucr_tsv";
    std::uint64_t i_seed = 0;
    impute->add_option("--in", i_in, "Input dataset path")->required();
    impute->add_option("--format", i_format, "Dataset format: ucr_tsv or csv_long")->capture_default_str();
    impute->add_option("--method", i_method, "Imputation method (see registry)")->required();
    impute->add_option("--config", i_config, "Imputer settings JSON (flags override it)");
    impute->add_option("--seed", i_seed, "Random seed")->capture_default_str();
    impute->add_option("--pipeline-out", i_pipeline_out, "Directory to persist the fitted pipeline");
    impute->add_option("--out", i_out, "Imputed dataset output path")->required();

    // ---- impute-test ----
    auto* impute_test = app.add_subcommand("impute-test", "Apply a saved pipeline to new data");
    std::string t_pipeline, t_in, t_out, t_format = "ucr_tsv";
    impute_test->add_option("--pipeline", t_pipeline, "Pipeline directory from impute --pipeline-out")
        ->required();
    impute_test->add_option("--in", t_in, "Input dataset path")->required();
    impute_test->add_option("--format", t_format, "Dataset format: ucr_tsv or csv_long")
        ->capture_default_str();
    impute_test->add_option("--out", t_out, "Imputed dataset output path")->required();

    // ---- classify ----
    auto* classify = app.add_subcommand("classify", "Train on one dataset, score another");
    std::string k_train, k_test, k_out, k_classifier = "rf", k_format = "ucr_tsv";
    int k_trees = 200, k_k = 1;
    std::uint64_t k_seed = 0;
    classify->add_option("--train", k_train, "Training dataset path")->required();
    classify->add_option("--test", k_test, "Test dataset path")->required();
    classify->add_option("--format", k_format, "Dataset format: ucr_tsv or csv_long")
        ->capture_default_str();
    classify->add_option("--classifier", k_classifier, "rf or knn")->capture_default_str();
    classify->add_option("--trees", k_trees, "Forest size for rf")->capture_default_str();
    classify->add_option("--k", k_k, "Neighbor count for knn")->capture_default_str();
    classify->add_option("--seed", k_seed, "Random seed")->capture_default_str();
    classify->add_option("--out", k_out, "Prediction CSV output path");

    // ---- benchmark ----
    auto* benchmark = app.add_subcommand("benchmark", "Run the full evaluation grid from a config");
    std::string b_config, b_out_dir;
    int b_jobs = 1;
    bool b_resume = false;
    benchmark->add_option("--config", b_config, "Benchmark config JSON")->required();
    benchmark->add_option("--out-dir", b_out_dir, "Output directory for records and reports")->required();
    benchmark->add_option("--jobs", b_jobs, "Worker threads (never changes results)")
        ->capture_default_str();
    benchmark->add_flag("--resume", b_resume, "Skip cells already in records.jsonl");

    // ---- report ----
    auto* report_cmd = app.add_subcommand("report", "Render a benchmark report or its rank tables");
    std::string r_in_dir, r_format = "csv", r_out;
    bool r_ranks = false;
    report_cmd->add_option("--in-dir", r_in_dir, "Benchmark output directory")->required();
    report_cmd->add_flag("--ranks", r_ranks, "Aggregate into per-mechanism/rate rank tables");
    report_cmd->add_option("--format", r_format, "csv, json, or markdown")->capture_default_str();
    report_cmd->add_option("--out", r_out, "Output path (stdout when omitted)");

    // ---- inspect ----
    auto* inspect = app.add_subcommand("inspect", "Summarize a dataset");
    std::string n_in, n_format = "ucr_tsv";
    inspect->add_option("--in", n_in, "Input dataset path")->required();
    inspect->add_option("--format", n_format, "Dataset format: ucr_tsv or csv_long")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints help or the parse error
        return rc == 0 ? 0 : 1;     // usage problems exit 1
    }

    if (*corrupt) {
        CorruptionSpec spec = c_spec;
        spec.mechanism = mechanism_from_string(c_mechanism);
        if (spec.rate <= 0.0 || spec.rate >= 1.0) throw UsageError("--rate must be in (0,1)");
        if (c_removal_prob >= 0.0) spec.removal_probability = c_removal_prob;
        const TimeSeriesDataset data = load(c_in, c_format);
        const CorruptionResult result = apply_corruption(data, spec);
        store(result.data, c_out, c_format);
        if (!c_log.empty()) write_removal_log(result.log, c_log);
        for (const auto& note : result.notes) std::cerr << "note: " << note << "\n";
        std::cout << "removed " << result.log.size() << " values (realized rate "
                  << format_double(result.realized_rate) << ")\n";
        return 0;
    }

    if (*impute) {
        ImputerConfig cfg;
        if (!i_config.empty()) cfg = read_imputer_config(i_config);
        cfg.gap.forest.seed = i_seed;
        auto imputer = make_imputer(i_method, cfg);
        const TimeSeriesDataset data = load(i_in, i_format);
        const TimeSeriesDataset imputed = imputer->fit_transform(data);
        store(imputed, i_out, i_format);
        if (!i_pipeline_out.empty()) save_pipeline(i_pipeline_out, i_method, *imputer, cfg);
        for (const auto& line : imputer->log()) std::cerr << "note: " << line << "\n";
        return 0;
    }

    if (*impute_test) {
        const auto imputer = load_pipeline(t_pipeline);
        const TimeSeriesDataset data = load(t_in, t_format);
        store(imputer->transform(data), t_out, t_format);
        return 0;
    }

    if (*classify) {
        const TimeSeriesDataset train = load(k_train, k_format);
        const TimeSeriesDataset test = load(k_test, k_format);
        if (!train.complete() || !test.complete())
            throw DataError("classify requires complete datasets; impute first");
        const RowMatrix train_x = raw_transform(train);
        const RowMatrix test_x = raw_transform(test);
        std::vector<int> predictions;
        if (k_classifier == "rf") {
            ForestParams params;
            params.num_trees = k_trees;
            params.seed = k_seed;
            predictions = predict(fit_forest(train_x, train.labels, train.num_classes, params), test_x);
        } else if (k_classifier == "knn") {
            predictions = knn_classify(train_x, train.labels, test_x, k_k);
        } else {
            throw UsageError("--classifier must be rf or knn");
        }
        std::cout << "accuracy " << format_double(accuracy(test.labels, predictions)) << "\n";
        if (!k_out.empty()) {
            std::ofstream out(k_out);
            if (!out) throw DataError("cannot write " + k_out);
            out << "instance,predicted,actual\n";
            for (std::size_t n = 0; n < predictions.size(); ++n)
                out << n << ',' << train.label_names[static_cast<std::size_t>(predictions[n])] << ','
                    << test.label_names[static_cast<std::size_t>(test.labels[n])] << '\n';
        }
        return 0;
    }

    if (*benchmark) {
        const BenchmarkConfig cfg = read_config(b_config);
        run_benchmark(cfg, b_out_dir, b_jobs, b_resume,
                      [](const std::string& msg) { std::cerr << msg << "\n"; });
        std::cout << "report written to " << (fs::path(b_out_dir) / "report.csv").string() << "\n";
        return 0;
    }

    if (*report_cmd) {
        if (r_format != "csv" && r_format != "json" && r_format != "markdown")
            throw UsageError("--format must be csv, json, or markdown");
        if (r_format == "markdown" && !r_ranks)
            throw UsageError("markdown output is only defined for --ranks");
        const BenchmarkReport report = read_report_csv((fs::path(r_in_dir) / "report.csv").string());
        std::string rendered;
        if (r_ranks) {
            const auto tables = rank_tables(report);
            for (const auto& t : tables)
                for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
            if (r_format == "markdown") {
                rendered = render_rank_tables_markdown(tables);
            } else if (r_format == "csv") {
                rendered = render_rank_tables_csv(tables);
            } else {
                json arr = json::array();
                for (const auto& t : tables)
                    arr.push_back({{"mechanism", t.mechanism},
                                   {"rate", t.rate},
                                   {"metric", t.metric},
                                   {"mean_rank", t.mean_rank}});
                rendered = arr.dump(2) + "\n";
            }
        } else if (r_format == "csv") {
            std::ifstream in(fs::path(r_in_dir) / "report.csv");
            std::ostringstream buf;
            buf << in.rdbuf();
            rendered = buf.str();
        } else {
            std::ifstream in(fs::path(r_in_dir) / "report.json");
            if (!in) throw DataError("no report.json in " + r_in_dir);
            std::ostringstream buf;
            buf << in.rdbuf();
            rendered = buf.str();
        }
        if (r_out.empty()) {
            std::cout << rendered;
        } else {
            std::ofstream out(r_out);
            if (!out) throw DataError("cannot write " + r_out);
            out << rendered;
        }
        return 0;
    }

    if (*inspect) {
        const TimeSeriesDataset data = load(n_in, n_format);
        std::cout << "instances " << data.num_instances() << "\n"
                  << "features " << data.num_features() << "\n"
                  << "length " << data.series_length() << "\n"
                  << "classes " << data.num_classes << "\n";
        std::map<int, std::size_t> counts;
        for (int y : data.labels) ++counts[y];
        for (const auto& [cls, count] : counts)
            std::cout << "class " << data.label_names[static_cast<std::size_t>(cls)] << " " << count
                      << "\n";
        const std::size_t missing = data.missing_count();
        std::cout << "missing " << missing << " ("
                  << format_double(static_cast<double>(missing) / static_cast<double>(data.size()))
                  << ")\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
