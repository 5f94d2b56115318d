#include "tsgap/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace tsgap {

using nlohmann::json;

std::string format_double(double value) {
    if (std::isnan(value)) return "NaN";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

DatasetFormat dataset_format_from_string(const std::string& name) {
    if (name == "ucr_tsv") return DatasetFormat::ucr_tsv;
    if (name == "csv_long") return DatasetFormat::csv_long;
    throw UsageError("unknown dataset format: " + name);
}

namespace {

bool is_nan_token(const std::string& tok) {
    return tok == "NaN" || tok == "nan" || tok == "NAN" || tok == "NA" || tok == "?";
}

double parse_value_token(const std::string& tok, std::size_t line_no) {
    double v = 0.0;
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw DataError("non-numeric value token '" + tok + "' at line " + std::to_string(line_no));
    return v;
}

std::vector<std::string> split_line(const std::string& line) {
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    std::vector<std::string> out;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, sep)) {
        // trim surrounding whitespace
        const auto a = tok.find_first_not_of(" \r\n");
        const auto b = tok.find_last_not_of(" \r\n");
        out.push_back(a == std::string::npos ? "" : tok.substr(a, b - a + 1));
    }
    return out;
}

// Original label tokens sorted numerically when all parse as numbers,
// lexicographically otherwise.
std::vector<std::string> sorted_label_dictionary(const std::vector<std::string>& raw) {
    std::vector<std::string> uniq = raw;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const bool all_numeric = std::all_of(uniq.begin(), uniq.end(), [](const std::string& s) {
        double v;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        return res.ec == std::errc() && res.ptr == s.data() + s.size();
    });
    if (all_numeric)
        std::sort(uniq.begin(), uniq.end(), [](const std::string& a, const std::string& b) {
            return std::stod(a) < std::stod(b);
        });
    return uniq;
}

}  // namespace

TimeSeriesDataset read_ucr_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> raw_labels;
    std::vector<std::vector<std::pair<double, bool>>> rows;  // (value, missing)
    std::string line;
    std::size_t line_no = 0, expected_cols = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tokens = split_line(line);
        if (tokens.size() < 2)
            throw DataError("line " + std::to_string(line_no) + ": expected label plus values");
        if (expected_cols == 0) expected_cols = tokens.size();
        else if (tokens.size() != expected_cols)
            throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " +
                            std::to_string(expected_cols) + " columns, got " + std::to_string(tokens.size()));
        raw_labels.push_back(tokens[0]);
        std::vector<std::pair<double, bool>> row;
        for (std::size_t c = 1; c < tokens.size(); ++c) {
            if (is_nan_token(tokens[c])) row.emplace_back(0.0, true);
            else row.emplace_back(parse_value_token(tokens[c], line_no), false);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("empty dataset file: " + path);

    const auto dict = sorted_label_dictionary(raw_labels);
    std::map<std::string, int> label_to_index;
    for (std::size_t i = 0; i < dict.size(); ++i) label_to_index[dict[i]] = static_cast<int>(i);

    TimeSeriesDataset d(rows.size(), 1, rows[0].size());
    d.num_classes = static_cast<int>(dict.size());
    d.label_names = dict;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        d.labels[n] = label_to_index[raw_labels[n]];
        for (std::size_t t = 0; t < rows[n].size(); ++t) {
            d.set_value(n, 0, t, rows[n][t].first);
            d.set_missing(n, 0, t, rows[n][t].second);
        }
    }
    d.validate();
    return d;
}

namespace {

void write_ucr_tsv(const TimeSeriesDataset& d, const std::string& path) {
    if (d.num_features() != 1) throw DataError("ucr_tsv format is univariate; use csv_long for p > 1");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t n = 0; n < d.num_instances(); ++n) {
        out << (d.label_names.empty() ? std::to_string(d.labels[n]) : d.label_names[static_cast<std::size_t>(d.labels[n])]);
        for (std::size_t t = 0; t < d.series_length(); ++t) {
            out << '\t';
            out << (d.is_missing(n, 0, t) ? "NaN" : format_double(d.value(n, 0, t)));
        }
        out << '\n';
    }
}

void write_csv_long(const TimeSeriesDataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "instance,label,feature,time,value\n";
    for (std::size_t n = 0; n < d.num_instances(); ++n) {
        const std::string label = d.label_names.empty()
                                      ? std::to_string(d.labels[n])
                                      : d.label_names[static_cast<std::size_t>(d.labels[n])];
        for (std::size_t j = 0; j < d.num_features(); ++j)
            for (std::size_t t = 0; t < d.series_length(); ++t)
                out << n << ',' << label << ',' << j << ',' << t << ','
                    << (d.is_missing(n, j, t) ? "NaN" : format_double(d.value(n, j, t))) << '\n';
    }
}

}  // namespace

TimeSeriesDataset read_csv_long(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
    if (split_line(line) != std::vector<std::string>{"instance", "label", "feature", "time", "value"})
        throw DataError("csv_long: unexpected header in " + path);

    struct Cell { std::size_t n, j, t; double v; bool missing; };
    std::vector<Cell> cells;
    std::map<std::size_t, std::string> labels_by_instance;
    std::size_t max_n = 0, max_j = 0, max_t = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tok = split_line(line);
        if (tok.size() != 5) throw DataError("csv_long: ragged row at line " + std::to_string(line_no));
        Cell c;
        c.n = static_cast<std::size_t>(std::stoull(tok[0]));
        c.j = static_cast<std::size_t>(std::stoull(tok[2]));
        c.t = static_cast<std::size_t>(std::stoull(tok[3]));
        c.missing = is_nan_token(tok[4]);
        c.v = c.missing ? 0.0 : parse_value_token(tok[4], line_no);
        labels_by_instance[c.n] = tok[1];
        max_n = std::max(max_n, c.n);
        max_j = std::max(max_j, c.j);
        max_t = std::max(max_t, c.t);
        cells.push_back(c);
    }
    if (cells.empty()) throw DataError("empty dataset file: " + path);
    if (cells.size() != (max_n + 1) * (max_j + 1) * (max_t + 1))
        throw DataError("csv_long: incomplete grid in " + path);

    std::vector<std::string> raw_labels;
    for (std::size_t n = 0; n <= max_n; ++n) raw_labels.push_back(labels_by_instance.at(n));
    const auto dict = sorted_label_dictionary(raw_labels);
    std::map<std::string, int> label_to_index;
    for (std::size_t i = 0; i < dict.size(); ++i) label_to_index[dict[i]] = static_cast<int>(i);

    TimeSeriesDataset d(max_n + 1, max_j + 1, max_t + 1);
    d.num_classes = static_cast<int>(dict.size());
    d.label_names = dict;
    for (std::size_t n = 0; n <= max_n; ++n) d.labels[n] = label_to_index[raw_labels[n]];
    for (const Cell& c : cells) {
        d.set_value(c.n, c.j, c.t, c.v);
        d.set_missing(c.n, c.j, c.t, c.missing);
    }
    d.validate();
    return d;
}

TimeSeriesDataset read_dataset(const std::string& path, DatasetFormat format) {
    return format == DatasetFormat::ucr_tsv ? read_ucr_tsv(path) : read_csv_long(path);
}

void write_dataset(const TimeSeriesDataset& dataset, const std::string& path, DatasetFormat format) {
    if (format == DatasetFormat::ucr_tsv) write_ucr_tsv(dataset, path);
    else write_csv_long(dataset, path);
}

void write_removal_log(const std::vector<Removal>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "instance,feature,time,true_value\n";
    for (const Removal& r : log)
        out << r.instance << ',' << r.feature << ',' << r.time << ',' << format_double(r.value) << '\n';
}

std::vector<Removal> read_removal_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || split_line(line) != std::vector<std::string>{"instance", "feature", "time", "true_value"})
        throw DataError("removal log: unexpected header in " + path);
    std::vector<Removal> log;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tok = split_line(line);
        if (tok.size() != 4) throw DataError("removal log: ragged row at line " + std::to_string(line_no));
        Removal r;
        r.instance = static_cast<std::size_t>(std::stoull(tok[0]));
        r.feature = static_cast<std::size_t>(std::stoull(tok[1]));
        r.time = static_cast<std::size_t>(std::stoull(tok[2]));
        r.value = parse_value_token(tok[3], line_no);
        log.push_back(r);
    }
    return log;
}

void write_proximity_csv(const ProximityMatrix& prox, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "row,col,weight\n";
    for (std::size_t r = 0; r < prox.rows.size(); ++r) {
        if (!prox.defined[r]) continue;
        for (const auto& [c, w] : prox.rows[r]) out << r << ',' << c << ',' << format_double(w) << '\n';
    }
}

// ---- config -------------------------------------------------------------------

std::string default_data_dir() {
    const char* env = std::getenv("TSGAP_DATA_DIR");
    return env ? std::string(env) : std::string(".");
}

namespace {

// Schema validation collects every offending path before throwing.
struct Validator {
    std::vector<std::string> errors;

    void check_keys(const json& obj, const std::string& path, const std::vector<std::string>& allowed) {
        for (const auto& [key, _] : obj.items())
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
                errors.push_back(path + key + ": unknown key");
    }
    void require(bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    }
    void finish() {
        if (errors.empty()) return;
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw UsageError(msg);
    }
};

void parse_forest_params(const json& obj, const std::string& path, ForestParams& out, Validator& v) {
    v.check_keys(obj, path, {"num_trees", "max_depth", "min_leaf", "features_per_split", "seed"});
    if (obj.contains("num_trees")) out.num_trees = obj["num_trees"].get<int>();
    if (obj.contains("max_depth")) out.max_depth = obj["max_depth"].get<int>();
    if (obj.contains("min_leaf")) out.min_leaf = obj["min_leaf"].get<int>();
    if (obj.contains("features_per_split")) out.features_per_split = obj["features_per_split"].get<int>();
    if (obj.contains("seed")) out.seed = obj["seed"].get<std::uint64_t>();
    v.require(out.num_trees > 0, path + "num_trees: must be positive");
    v.require(out.min_leaf >= 1, path + "min_leaf: must be >= 1");
}

void parse_imputer_section(const json& im, ImputerConfig& cfg, Validator& v) {
    v.check_keys(im, "imputers.", {"constant_value", "knn_k", "dtw_band", "rolling_window", "gap"});
    if (im.contains("constant_value")) cfg.baseline.constant_value = im["constant_value"].get<double>();
    if (im.contains("knn_k")) cfg.baseline.knn_k = im["knn_k"].get<int>();
    if (im.contains("dtw_band")) cfg.baseline.dtw_band = im["dtw_band"].get<std::size_t>();
    if (im.contains("rolling_window")) cfg.baseline.rolling_window = im["rolling_window"].get<int>();
    v.require(cfg.baseline.knn_k >= 1, "imputers.knn_k: must be >= 1");
    v.require(cfg.baseline.rolling_window >= 1, "imputers.rolling_window: must be >= 1");
    if (im.contains("gap")) {
        const json& g = im["gap"];
        v.check_keys(g, "imputers.gap.",
                     {"init_strategy", "init_by_label", "init_knn_k", "kernel_count", "max_iters",
                      "internal_metric", "renormalize_weights", "update_observed", "forest"});
        GapConfig& gc = cfg.gap;
        if (g.contains("init_strategy")) gc.init_strategy = g["init_strategy"].get<std::string>();
        if (g.contains("init_by_label")) gc.init_by_label = g["init_by_label"].get<bool>();
        if (g.contains("init_knn_k")) gc.init_knn_k = g["init_knn_k"].get<int>();
        if (g.contains("kernel_count")) gc.kernel_count = g["kernel_count"].get<std::size_t>();
        if (g.contains("max_iters")) gc.max_iters = g["max_iters"].get<int>();
        if (g.contains("internal_metric")) gc.internal_metric = g["internal_metric"].get<std::string>();
        if (g.contains("renormalize_weights")) gc.renormalize_weights = g["renormalize_weights"].get<bool>();
        if (g.contains("update_observed")) gc.update_observed = g["update_observed"].get<bool>();
        try {
            init_strategy_from_string(gc.init_strategy);
        } catch (const UsageError&) {
            v.errors.push_back("imputers.gap.init_strategy: unknown strategy '" + gc.init_strategy + "'");
        }
        v.require(gc.max_iters >= 1, "imputers.gap.max_iters: must be >= 1");
        v.require(gc.internal_metric == "r2_f1" || gc.internal_metric == "rmse" ||
                      gc.internal_metric == "mae" || gc.internal_metric == "accuracy",
                  "imputers.gap.internal_metric: must be one of r2_f1, rmse, mae, accuracy");
        if (g.contains("forest")) parse_forest_params(g["forest"], "imputers.gap.forest.", gc.forest, v);
    }
}

}  // namespace

ImputerConfig read_imputer_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("config parse error in " + path + ": " + e.what());
    }
    Validator v;
    ImputerConfig cfg;
    parse_imputer_section(doc, cfg, v);
    v.finish();
    return cfg;
}

BenchmarkConfig read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("config parse error in " + path + ": " + e.what());
    }
    Validator v;
    v.check_keys(doc, "", {"version", "datasets", "data_dir", "mechanisms", "rates", "methods", "seeds",
                           "standardize", "test_fraction", "corruption", "imputers", "classifiers"});
    if (doc.contains("version")) v.require(doc["version"].get<int>() == 1, "version: only v1 is supported");

    BenchmarkConfig cfg;
    cfg.data_dir = default_data_dir();
    v.require(doc.contains("datasets") && doc["datasets"].is_array() && !doc["datasets"].empty(),
              "datasets: required non-empty array");
    if (doc.contains("datasets") && doc["datasets"].is_array())
        cfg.datasets = doc["datasets"].get<std::vector<std::string>>();
    if (doc.contains("data_dir")) cfg.data_dir = doc["data_dir"].get<std::string>();

    cfg.mechanisms = doc.value("mechanisms", std::vector<std::string>{"MCAR"});
    for (const auto& m : cfg.mechanisms) {
        try {
            mechanism_from_string(m);
        } catch (const UsageError&) {
            v.errors.push_back("mechanisms: unknown mechanism '" + m + "'");
        }
    }
    cfg.rates = doc.value("rates", std::vector<double>{0.25});
    for (std::size_t i = 0; i < cfg.rates.size(); ++i)
        v.require(cfg.rates[i] > 0.0 && cfg.rates[i] < 1.0,
                  "rates[" + std::to_string(i) + "]: must be in (0,1)");
    v.require(doc.contains("methods") && doc["methods"].is_array() && !doc["methods"].empty(),
              "methods: required non-empty array");
    if (doc.contains("methods") && doc["methods"].is_array())
        cfg.methods = doc["methods"].get<std::vector<std::string>>();
    {
        const auto registry = imputer_registry();
        for (const auto& m : cfg.methods)
            v.require(std::find(registry.begin(), registry.end(), m) != registry.end(),
                      "methods: unknown method '" + m + "'");
    }
    cfg.seeds = doc.value("seeds", std::vector<std::uint64_t>{0});
    v.require(!cfg.seeds.empty(), "seeds: must be non-empty");

    if (doc.contains("standardize")) cfg.standardize = doc["standardize"].get<bool>();
    if (doc.contains("test_fraction")) {
        cfg.test_fraction = doc["test_fraction"].get<double>();
        v.require(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0, "test_fraction: must be in (0,1)");
    }

    if (doc.contains("corruption")) {
        const json& c = doc["corruption"];
        v.check_keys(c, "corruption.", {"lag", "threshold_percentile", "global_threshold"});
        if (c.contains("lag")) cfg.corruption_lag = c["lag"].get<int>();
        if (c.contains("threshold_percentile")) cfg.threshold_percentile = c["threshold_percentile"].get<double>();
        if (c.contains("global_threshold")) cfg.global_threshold = c["global_threshold"].get<bool>();
        v.require(cfg.corruption_lag >= 1, "corruption.lag: must be >= 1");
        v.require(cfg.threshold_percentile > 0.0 && cfg.threshold_percentile < 1.0,
                  "corruption.threshold_percentile: must be in (0,1)");
    }

    if (doc.contains("imputers")) parse_imputer_section(doc["imputers"], cfg.imputer, v);

    if (doc.contains("classifiers")) {
        const json& c = doc["classifiers"];
        v.check_keys(c, "classifiers.", {"forest", "knn_k"});
        if (c.contains("forest")) parse_forest_params(c["forest"], "classifiers.forest.", cfg.classifier_forest, v);
        if (c.contains("knn_k")) cfg.classifier_knn_k = c["knn_k"].get<int>();
        v.require(cfg.classifier_knn_k >= 1, "classifiers.knn_k: must be >= 1");
    }

    v.finish();
    return cfg;
}

void write_config(const BenchmarkConfig& cfg, const std::string& path) {
    json doc{{"version", 1},
             {"datasets", cfg.datasets},
             {"data_dir", cfg.data_dir},
             {"mechanisms", cfg.mechanisms},
             {"rates", cfg.rates},
             {"methods", cfg.methods},
             {"seeds", cfg.seeds},
             {"standardize", cfg.standardize},
             {"test_fraction", cfg.test_fraction},
             {"corruption",
              {{"lag", cfg.corruption_lag},
               {"threshold_percentile", cfg.threshold_percentile},
               {"global_threshold", cfg.global_threshold}}},
             {"imputers",
              {{"constant_value", cfg.imputer.baseline.constant_value},
               {"knn_k", cfg.imputer.baseline.knn_k},
               {"rolling_window", cfg.imputer.baseline.rolling_window},
               {"gap",
                {{"init_strategy", cfg.imputer.gap.init_strategy},
                 {"init_by_label", cfg.imputer.gap.init_by_label},
                 {"init_knn_k", cfg.imputer.gap.init_knn_k},
                 {"kernel_count", cfg.imputer.gap.kernel_count},
                 {"max_iters", cfg.imputer.gap.max_iters},
                 {"internal_metric", cfg.imputer.gap.internal_metric},
                 {"renormalize_weights", cfg.imputer.gap.renormalize_weights},
                 {"update_observed", cfg.imputer.gap.update_observed},
                 {"forest",
                  {{"num_trees", cfg.imputer.gap.forest.num_trees},
                   {"max_depth", cfg.imputer.gap.forest.max_depth},
                   {"min_leaf", cfg.imputer.gap.forest.min_leaf},
                   {"features_per_split", cfg.imputer.gap.forest.features_per_split},
                   {"seed", cfg.imputer.gap.forest.seed}}}}}}},
             {"classifiers",
              {{"forest",
                {{"num_trees", cfg.classifier_forest.num_trees},
                 {"max_depth", cfg.classifier_forest.max_depth},
                 {"min_leaf", cfg.classifier_forest.min_leaf},
                 {"features_per_split", cfg.classifier_forest.features_per_split},
                 {"seed", cfg.classifier_forest.seed}}},
               {"knn_k", cfg.classifier_knn_k}}}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

}  // namespace tsgap
