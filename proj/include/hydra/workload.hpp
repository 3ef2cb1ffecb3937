#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hydra/data_model.hpp"
#include "hydra/error.hpp"

namespace hydra {

// Synthetic multidimensional telemetry: subpopulation sizes follow Zipf(alpha)
// over the rank, metric values follow Zipf(metric_alpha) over their domain.
// Two dimensions: d0 is unique per rank, d1 buckets ranks mod 16.
struct WorkloadSpec {
    std::uint64_t subpopulations = 100;
    double alpha = 0.99;
    std::uint64_t records = 10000;
    std::uint64_t metric_domain = 8;
    std::uint64_t seed = 1;
    std::uint32_t buckets = 16;   // d1 cardinality
    double metric_alpha = 1.0;    // 0 = uniform metric values
};

struct Workload {
    WorkloadSpec spec;
    std::vector<DataRecord> records;
    std::vector<std::uint64_t> rank_counts;  // exact records per rank
};

namespace detail {

// Inverse-CDF sampler over Zipf(alpha) ranks 1..n.
class ZipfSampler {
public:
    ZipfSampler(std::uint64_t n, double alpha) : cdf_(n) {
        double acc = 0.0;
        for (std::uint64_t i = 0; i < n; i++) {
            acc += std::pow(double(i + 1), -alpha);
            cdf_[i] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }

    std::uint64_t operator()(std::mt19937_64& rng) const {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return std::uint64_t(it - cdf_.begin());
    }

private:
    std::vector<double> cdf_;
};

}  // namespace detail

inline Schema workload_schema() { return Schema{{"d0", "d1"}, "metric"}; }

inline Workload generate_workload(const WorkloadSpec& spec) {
    if (spec.records < 1 || spec.subpopulations < 1 || spec.metric_domain < 1 ||
        spec.alpha < 0.0 || spec.metric_alpha < 0.0)
        throw_usage("workload: invalid spec");
    Workload wl;
    wl.spec = spec;
    wl.records.reserve(spec.records);
    wl.rank_counts.assign(spec.subpopulations, 0);

    std::mt19937_64 rng(spec.seed);
    detail::ZipfSampler zipf(spec.subpopulations, spec.alpha);
    detail::ZipfSampler metric_zipf(spec.metric_domain, spec.metric_alpha);

    for (std::uint64_t i = 0; i < spec.records; i++) {
        std::uint64_t rank = zipf(rng);
        wl.rank_counts[rank]++;
        DataRecord rec;
        rec.dims = {"s" + std::to_string(rank), "b" + std::to_string(rank % spec.buckets)};
        rec.metric = "m" + std::to_string(metric_zipf(rng));
        wl.records.push_back(std::move(rec));
    }
    return wl;
}

// Analytic Zipf share of the given 0-based rank, for manifest cross-checks.
inline double zipf_share(std::uint64_t n, double alpha, std::uint64_t rank) {
    double acc = 0.0;
    for (std::uint64_t i = 0; i < n; i++) acc += std::pow(double(i + 1), -alpha);
    return std::pow(double(rank + 1), -alpha) / acc;
}

inline void write_workload_csv(const Workload& wl, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw_data("cannot open output file: " + path);
    const Schema schema = workload_schema();
    out << schema.dimensions[0] << "," << schema.dimensions[1] << "," << schema.metric << "\n";
    for (const auto& rec : wl.records)
        out << rec.dims[0] << "," << rec.dims[1] << "," << rec.metric << "\n";
    if (!out) throw_data("write failed: " + path);
}

}  // namespace hydra
