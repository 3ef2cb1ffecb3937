#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hydra/config.hpp"
#include "hydra/data_model.hpp"
#include "hydra/error.hpp"
#include "hydra/hydra_sketch.hpp"
#include "hydra/statistics.hpp"

namespace hydra {

// Exact brute-force baseline: per-subpopulation frequency maps. Evaluation
// only; memory-unbounded by design and never on the production query path.
class ExactStore {
public:
    using FrequencyMap = std::unordered_map<std::string, std::uint64_t>;

    void ingest(const DataRecord& rec) {
        for (const auto& sp : fanout(rec)) subpops_[sp.encode()][rec.metric]++;
        records_++;
    }

    std::uint64_t records() const { return records_; }
    std::size_t subpopulation_count() const { return subpops_.size(); }

    const FrequencyMap* find(std::string_view encoded_subpop) const {
        auto it = subpops_.find(std::string(encoded_subpop));
        return it == subpops_.end() ? nullptr : &it->second;
    }

    std::vector<std::string> observed_subpops() const {
        std::vector<std::string> keys;
        keys.reserve(subpops_.size());
        for (const auto& [k, v] : subpops_) keys.push_back(k);
        std::sort(keys.begin(), keys.end());
        return keys;
    }

    double stat(std::string_view encoded_subpop, const GSumSpec& spec) const {
        const FrequencyMap* fm = find(encoded_subpop);
        static const FrequencyMap empty;
        return exact_stat(fm ? *fm : empty, spec);
    }

    std::vector<std::pair<std::string, std::uint64_t>> heavy_hitters(std::string_view encoded_subpop,
                                                                     double alpha) const {
        const FrequencyMap* fm = find(encoded_subpop);
        std::vector<std::pair<std::string, std::uint64_t>> out;
        if (!fm) return out;
        std::uint64_t l1 = 0;
        for (const auto& [m, f] : *fm) l1 += f;
        for (const auto& [m, f] : *fm) {
            if (double(f) >= alpha * double(l1)) out.emplace_back(m, f);
        }
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        return out;
    }

    // G-sum over the fanned-out composite stream (the stream a grid row
    // actually sees); this is the G_S the error band is stated against.
    double composite_g_s(const GSumSpec& spec) const {
        double sum = 0.0;
        for (const auto& [sp, fm] : subpops_) {
            for (const auto& [m, f] : fm) sum += g_of(spec.stat, double(f));
        }
        return sum;
    }

    static double exact_stat(const FrequencyMap& fm, const GSumSpec& spec) {
        switch (spec.stat) {
            case Statistic::l1:
            case Statistic::l2:
            case Statistic::cardinality:
            case Statistic::heavy_hitters: {
                double sum = 0.0;
                for (const auto& [m, f] : fm)
                    sum += g_of(spec.stat == Statistic::heavy_hitters ? Statistic::l1 : spec.stat,
                                double(f));
                return sum;
            }
            case Statistic::entropy: {
                if (fm.empty()) throw_data("undefined entropy: empty subpopulation");
                double l1 = 0.0, flogf = 0.0;
                for (const auto& [m, f] : fm) l1 += double(f);
                for (const auto& [m, f] : fm) flogf += g_of(Statistic::entropy, double(f));
                return finalize_entropy(l1, flogf);
            }
        }
        throw_internal("unknown statistic tag");
    }

private:
    std::unordered_map<std::string, FrequencyMap> subpops_;
    std::uint64_t records_ = 0;
};

// One evaluation row: a qualifying subpopulation, its share of the stream,
// and the sketch's signed relative error.
struct ErrorSample {
    std::string encoded_subpop;
    double g_ratio = 0.0;  // G_i / G_S
    double exact = 0.0;
    double estimate = 0.0;
    double relative_error = 0.0;
    bool in_band = false;
};

struct StatReport {
    std::string statistic;
    std::size_t qualifying = 0;
    double coverage = 0.0;  // fraction inside the guarantee band
    double p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
    double mean_abs_error = 0.0;
    std::vector<ErrorSample> samples;
};

namespace detail {

inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double idx = p * double(v.size() - 1);
    std::size_t lo = std::size_t(idx);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = idx - double(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace detail

// Error-distribution report over every observed subpopulation whose exact
// G-sum is at least gmin_ratio * G_S, with guarantee-band coverage.
inline StatReport evaluate_statistic(const ExactStore& store, const HydraSketch& sketch,
                                     const GSumSpec& spec, double gmin_ratio,
                                     bool keep_samples = false) {
    StatReport rep;
    rep.statistic = statistic_name(spec);
    const double g_s = store.composite_g_s(spec.stat == Statistic::entropy
                                               ? GSumSpec{Statistic::l1}
                                               : spec);
    const double g_min = gmin_ratio * g_s;
    std::vector<double> errors;
    std::size_t covered = 0;
    double abs_sum = 0.0;

    for (const auto& enc : store.observed_subpops()) {
        // Qualification is on the subpopulation's weight in the colliding
        // stream, i.e. its L1-composite share for entropy.
        double weight = spec.stat == Statistic::entropy ? store.stat(enc, {Statistic::l1})
                                                        : store.stat(enc, spec);
        if (!(weight >= g_min) || weight <= 0.0) continue;
        double exact = store.stat(enc, spec);
        if (exact <= 0.0) continue;
        double est = sketch.query_encoded(enc, spec);
        double err = (est - exact) / exact;
        ErrorBound band = error_bound(sketch.config(), std::max(1.0, g_s / weight));
        bool in_band = err >= band.lower - 1e-12 && err <= band.upper + 1e-12;

        errors.push_back(err);
        abs_sum += std::abs(err);
        if (in_band) covered++;
        if (keep_samples)
            rep.samples.push_back({enc, weight / g_s, exact, est, err, in_band});
    }

    rep.qualifying = errors.size();
    if (!errors.empty()) {
        rep.coverage = double(covered) / double(errors.size());
        rep.mean_abs_error = abs_sum / double(errors.size());
        rep.p5 = detail::percentile(errors, 0.05);
        rep.p25 = detail::percentile(errors, 0.25);
        rep.p50 = detail::percentile(errors, 0.50);
        rep.p75 = detail::percentile(errors, 0.75);
        rep.p95 = detail::percentile(errors, 0.95);
    }
    return rep;
}

}  // namespace hydra
