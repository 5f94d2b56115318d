#include "tsgap/missingness.hpp"

#include <algorithm>
#include <cmath>

namespace tsgap {

Mechanism mechanism_from_string(const std::string& name) {
    if (name == "MCAR" || name == "mcar") return Mechanism::MCAR;
    if (name == "MAR" || name == "mar") return Mechanism::MAR;
    if (name == "MNAR" || name == "mnar") return Mechanism::MNAR;
    throw UsageError("unknown missingness mechanism: " + name);
}

std::string to_string(Mechanism mechanism) {
    switch (mechanism) {
        case Mechanism::MCAR: return "MCAR";
        case Mechanism::MAR: return "MAR";
        case Mechanism::MNAR: return "MNAR";
    }
    return "MCAR";
}

double percentile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

namespace {

struct PlannedRemovals {
    // per (instance, feature): time indices planned for removal
    std::vector<std::vector<std::size_t>> by_series;
};

// Drops planned removals that would leave a series with no observed value.
void apply_keep_one(const TimeSeriesDataset& dataset, PlannedRemovals& plan,
                    std::vector<std::string>& notes, std::uint64_t seed) {
    const std::size_t p = dataset.num_features();
    for (std::size_t n = 0; n < dataset.num_instances(); ++n)
        for (std::size_t j = 0; j < p; ++j) {
            auto& times = plan.by_series[n * p + j];
            if (times.empty()) continue;
            const std::size_t observed = dataset.observed_count(n, j);
            if (times.size() < observed) continue;
            Rng rng = make_rng(mix_seed(seed, n * p + j + 0xBEEFULL));
            std::uniform_int_distribution<std::size_t> pick(0, times.size() - 1);
            const std::size_t keep = pick(rng);
            notes.push_back("keep-one guard: retained (" + std::to_string(n) + "," + std::to_string(j) +
                            "," + std::to_string(times[keep]) + ")");
            times.erase(times.begin() + static_cast<std::ptrdiff_t>(keep));
        }
}

CorruptionResult finalize(const TimeSeriesDataset& dataset, PlannedRemovals& plan,
                          std::vector<std::string> notes, std::vector<double> thresholds) {
    CorruptionResult result;
    result.data = dataset;
    result.notes = std::move(notes);
    result.thresholds = std::move(thresholds);
    const std::size_t p = dataset.num_features();
    for (std::size_t n = 0; n < dataset.num_instances(); ++n)
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t t : plan.by_series[n * p + j]) {
                result.log.push_back({n, j, t, dataset.value(n, j, t)});
                result.data.set_missing(n, j, t, true);
            }
    result.realized_rate = static_cast<double>(result.log.size()) / static_cast<double>(dataset.size());
    return result;
}

std::vector<double> series_values(const TimeSeriesDataset& d, std::size_t n, std::size_t j) {
    std::vector<double> out;
    for (std::size_t t = 0; t < d.series_length(); ++t)
        if (!d.is_missing(n, j, t)) out.push_back(d.value(n, j, t));
    return out;
}

}  // namespace

CorruptionResult apply_corruption(const TimeSeriesDataset& dataset, const CorruptionSpec& spec) {
    if (!(spec.rate > 0.0 && spec.rate < 1.0)) throw UsageError("corruption rate must be in (0,1)");
    if (spec.lag < 1) throw UsageError("corruption lag must be >= 1");
    const std::size_t N = dataset.num_instances(), p = dataset.num_features(), T = dataset.series_length();
    PlannedRemovals plan;
    plan.by_series.assign(N * p, {});
    std::vector<std::string> notes;
    std::vector<double> thresholds;

    if (spec.mechanism == Mechanism::MCAR) {
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t j = 0; j < p; ++j) {
                Rng rng = make_rng(mix_seed(spec.seed, n * p + j));
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                for (std::size_t t = 0; t < T; ++t) {
                    const double u = unit(rng);
                    if (!dataset.is_missing(n, j, t) && u < spec.rate) plan.by_series[n * p + j].push_back(t);
                }
            }
    } else {
        if (spec.mechanism == Mechanism::MAR && T <= static_cast<std::size_t>(spec.lag))
            throw DataError("MAR corruption requires T > lag");

        // thresholds
        thresholds.assign(N * p, 0.0);
        if (spec.global_threshold) {
            for (std::size_t j = 0; j < p; ++j) {
                std::vector<double> all;
                for (std::size_t n = 0; n < N; ++n) {
                    auto vs = series_values(dataset, n, j);
                    all.insert(all.end(), vs.begin(), vs.end());
                }
                const double thr = percentile_linear(std::move(all), spec.threshold_percentile);
                for (std::size_t n = 0; n < N; ++n) thresholds[n * p + j] = thr;
            }
        } else {
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t j = 0; j < p; ++j)
                    thresholds[n * p + j] =
                        percentile_linear(series_values(dataset, n, j), spec.threshold_percentile);
        }

        // eligibility pass
        std::vector<std::vector<std::size_t>> eligible(N * p);
        std::size_t pool = 0;
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t j = 0; j < p; ++j) {
                const double thr = thresholds[n * p + j];
                for (std::size_t t = 0; t < T; ++t) {
                    if (dataset.is_missing(n, j, t)) continue;
                    bool ok = false;
                    if (spec.mechanism == Mechanism::MNAR) {
                        ok = dataset.value(n, j, t) > thr;
                    } else {  // MAR: lagged value drives eligibility, t <= lag never removed
                        if (t >= static_cast<std::size_t>(spec.lag) &&
                            !dataset.is_missing(n, j, t - static_cast<std::size_t>(spec.lag)))
                            ok = dataset.value(n, j, t - static_cast<std::size_t>(spec.lag)) > thr;
                    }
                    if (ok) {
                        eligible[n * p + j].push_back(t);
                        ++pool;
                    }
                }
            }

        const double target_count = spec.rate * static_cast<double>(dataset.size());
        double prob = spec.removal_probability
                          ? *spec.removal_probability
                          : (pool == 0 ? 0.0 : std::min(1.0, target_count / static_cast<double>(pool)));
        notes.push_back("calibration: eligible pool = " + std::to_string(pool) + ", removal probability = " +
                        std::to_string(prob));
        if (static_cast<double>(pool) < target_count)
            notes.push_back("shortfall: eligible pool (" + std::to_string(pool) +
                            ") below target removals (" + std::to_string(target_count) + ")");

        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t j = 0; j < p; ++j) {
                Rng rng = make_rng(mix_seed(spec.seed, n * p + j));
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                for (std::size_t t : eligible[n * p + j])
                    if (unit(rng) < prob) plan.by_series[n * p + j].push_back(t);
            }
    }

    apply_keep_one(dataset, plan, notes, spec.seed);
    return finalize(dataset, plan, std::move(notes), std::move(thresholds));
}

TimeSeriesDataset restore_removals(const TimeSeriesDataset& corrupted, const std::vector<Removal>& log) {
    TimeSeriesDataset out = corrupted;
    for (const Removal& r : log) {
        out.set_value(r.instance, r.feature, r.time, r.value);
        out.set_missing(r.instance, r.feature, r.time, false);
    }
    return out;
}

}  // namespace tsgap
