#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/config.hpp"
#include "hydra/data_model.hpp"
#include "hydra/error.hpp"
#include "hydra/hash.hpp"
#include "hydra/statistics.hpp"
#include "hydra/universal_sketch.hpp"

namespace hydra {

struct IngestOptions {
    bool one_hash = true;   // substring-split row/column hashing
    bool one_layer = true;  // single-layer universal-sketch updates
};

// The sketch-of-sketches: an r x w grid of universal sketches. Each
// (subpopulation, metric) update places the subpopulation into one cell per
// row and feeds the composite key into that cell's universal sketch. Queries
// take the lower median over the r per-cell estimates, with candidates
// filtered to the queried subpopulation's composite-key prefix.
class HydraSketch {
public:
    HydraSketch() = default;

    explicit HydraSketch(const HydraConfig& cfg, const IngestOptions& opts = {})
        : cfg_(cfg), opts_(opts) {
        if (cfg.r < 1 || cfg.w < 1) throw_usage("hydra sketch: r and w must be >= 1");
        grid_.reserve(std::size_t(cfg.r) * cfg.w);
        for (std::uint32_t i = 0; i < cfg.r; i++) {
            for (std::uint32_t j = 0; j < cfg.w; j++) {
                UsParams p;
                p.L = cfg.L;
                p.k = cfg.k;
                p.r_cs = cfg.r_cs;
                p.w_cs = cfg.w_cs;
                p.salt = derive_salt(cfg.stream_seed, std::uint64_t(i) * cfg.w + j);
                p.one_hash = opts.one_hash;
                p.one_layer = opts.one_layer;
                grid_.emplace_back(p);
            }
        }
    }

    const HydraConfig& config() const { return cfg_; }
    const IngestOptions& options() const { return opts_; }
    std::uint64_t total_updates() const { return total_updates_; }
    const UniversalSketch& cell(std::uint32_t row, std::uint32_t col) const {
        return grid_[std::size_t(row) * cfg_.w + col];
    }
    UniversalSketch& cell(std::uint32_t row, std::uint32_t col) {
        return grid_[std::size_t(row) * cfg_.w + col];
    }

    // One cell per row for a subpopulation; identical at update and query
    // time. Falls back to one digest per row when the substring budget is
    // exceeded or single-hash mode is off.
    std::vector<std::uint32_t> place(std::string_view encoded_subpop) const {
        Digest128 d = digest128(encoded_subpop, cfg_.stream_seed);
        if (opts_.one_hash && split_budget_ok(cfg_.r, cfg_.w)) {
            return split_row_indices(d, cfg_.r, cfg_.w);
        }
        std::vector<std::uint32_t> cols(cfg_.r);
        for (std::uint32_t i = 0; i < cfg_.r; i++) {
            Digest128 rd = digest128(encoded_subpop, cfg_.stream_seed ^ (std::uint64_t(i) + 1));
            cols[i] = std::uint32_t((static_cast<unsigned __int128>(rd.hi) * cfg_.w) >> 64);
        }
        return cols;
    }

    void update(const SubpopulationKey& subpop, std::string_view metric) {
        update_encoded(subpop.encode(), metric);
    }

    void update_encoded(std::string_view encoded_subpop, std::string_view metric) {
        const std::string composite = make_composite_key(encoded_subpop, metric);
        if (composite.size() > cfg_.max_key_bytes)
            throw_data("composite key exceeds configured max_key_bytes");
        const Digest128 cd = digest128(composite, cfg_.stream_seed);
        const auto cols = place(encoded_subpop);
        for (std::uint32_t i = 0; i < cfg_.r; i++) cell(i, cols[i]).update(composite, cd);
        total_updates_++;
    }

    // Fan-out ingestion: one update per subpopulation the record belongs to.
    void ingest(const DataRecord& rec) {
        for (const auto& sp : fanout(rec)) update(sp, rec.metric);
    }

    double query(const SubpopulationKey& subpop, const GSumSpec& spec) const {
        return query_encoded(subpop.encode(), spec);
    }

    double query_encoded(std::string_view encoded_subpop, const GSumSpec& spec) const {
        const auto cols = place(encoded_subpop);
        std::vector<double> per_row(cfg_.r);
        for (std::uint32_t i = 0; i < cfg_.r; i++)
            per_row[i] = cell_estimate(cell(i, cols[i]), spec, encoded_subpop);
        return lower_median(per_row);
    }

    // Alpha-heavy-hitter metrics within one subpopulation: candidate metrics
    // are gathered from all r cells' heaps, each metric's frequency is the
    // median over rows of its physical-layer estimate, and metrics at or
    // above alpha * L1 are returned sorted by estimate descending.
    std::vector<std::pair<std::string, double>> heavy_hitters(const SubpopulationKey& subpop,
                                                              double alpha) const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw_usage("heavy hitters: alpha must be in (0, 1)");
        const std::string enc = subpop.encode();
        const double l1 = query_encoded(enc, {Statistic::l1});
        const auto cols = place(enc);

        std::map<std::string, std::string> metrics;  // metric -> composite key
        for (std::uint32_t i = 0; i < cfg_.r; i++) {
            const auto& us = cell(i, cols[i]);
            for (std::uint32_t l = 0; l < cfg_.L; l++) {
                for (const auto& [key, e] : us.heap(l).entries()) {
                    if (composite_matches(key, enc))
                        metrics.emplace(std::string(composite_metric(key, enc)), key);
                }
            }
        }
        std::vector<std::pair<std::string, double>> out;
        for (const auto& [metric, composite] : metrics) {
            Digest128 cd = digest128(composite, cfg_.stream_seed);
            std::vector<double> per_row(cfg_.r);
            for (std::uint32_t i = 0; i < cfg_.r; i++)
                per_row[i] = cell(i, cols[i]).frequency_estimate(cd);
            double est = lower_median(per_row);
            if (est >= alpha * l1) out.emplace_back(metric, est);
        }
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        return out;
    }

    // Whole-stream G-sum over the fanned-out composite stream, for error-band
    // reporting. Exact for L1 (every ingested pair counts once);
    // estimated for other statistics by summing row 0's unfiltered G-sums.
    double g_s_estimate(const GSumSpec& spec) const {
        if (spec.stat == Statistic::l1 || spec.stat == Statistic::heavy_hitters)
            return double(total_updates_);
        double sum = 0.0;
        for (std::uint32_t j = 0; j < cfg_.w; j++) sum += cell(0, j).estimate_gsum(spec);
        return sum;
    }

    bool compatible(const HydraSketch& o) const {
        return cfg_.same_shape(o.cfg_) && opts_.one_hash == o.opts_.one_hash &&
               opts_.one_layer == o.opts_.one_layer;
    }

    void merge(const HydraSketch& other, MergeMode mode) {
        if (!compatible(other)) throw_data("incompatible sketches: hydra config mismatch");
        for (std::size_t i = 0; i < grid_.size(); i++) grid_[i].merge(other.grid_[i], mode);
        total_updates_ += other.total_updates_;
    }

    // Serialization hooks.
    void set_total_updates(std::uint64_t n) { total_updates_ = n; }

private:
    double cell_estimate(const UniversalSketch& us, const GSumSpec& spec,
                         std::string_view enc) const {
        if (spec.stat == Statistic::entropy) {
            double l1 = us.estimate_gsum({Statistic::l1}, enc);
            if (!(l1 > 0.0)) return 0.0;
            double flogf = us.estimate_gsum({Statistic::entropy}, enc);
            double card = us.estimate_gsum({Statistic::cardinality}, enc);
            return finalize_entropy(l1, flogf, card >= 1.0 ? std::optional<double>(card) : std::nullopt);
        }
        return us.estimate_gsum(spec, enc);
    }

    static double lower_median(std::vector<double> v) {
        auto mid = v.begin() + (v.size() - 1) / 2;
        std::nth_element(v.begin(), mid, v.end());
        return *mid;
    }

    HydraConfig cfg_;
    IngestOptions opts_;
    std::vector<UniversalSketch> grid_;
    std::uint64_t total_updates_ = 0;
};

}  // namespace hydra
