#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hydra/count_sketch.hpp"
#include "hydra/data_model.hpp"
#include "hydra/error.hpp"
#include "hydra/hash.hpp"
#include "hydra/statistics.hpp"

namespace hydra {

// One heavy-hitter candidate. The digest is held in memory only; on
// deserialization it is recomputed from the key bytes and the stream seed.
struct HeapEntry {
    std::string key;
    Digest128 digest;
    double estimate = 0.0;
};

namespace detail {

// Bounded candidate set with distinct keys. Eviction removes the minimum
// (estimate, key) pair; ties break on lexicographic key order.
class LayerHeap {
public:
    explicit LayerHeap(std::uint32_t capacity = 1) : capacity_(capacity) {}

    std::uint32_t capacity() const { return capacity_; }
    std::size_t size() const { return entries_.size(); }
    const std::unordered_map<std::string, HeapEntry>& entries() const { return entries_; }

    void touch(std::string_view key, Digest128 digest, double estimate) {
        if (auto it = entries_.find(std::string(key)); it != entries_.end()) {
            it->second.estimate = estimate;
            return;
        }
        if (entries_.size() < capacity_) {
            std::string k(key);
            entries_.emplace(k, HeapEntry{k, digest, estimate});
            return;
        }
        auto min_it = min_entry();
        if (estimate > min_it->second.estimate ||
            (estimate == min_it->second.estimate && key < min_it->second.key)) {
            entries_.erase(min_it);
            std::string k(key);
            entries_.emplace(k, HeapEntry{k, digest, estimate});
        }
    }

    void clear() { entries_.clear(); }

    void insert_unchecked(HeapEntry e) {
        std::string k = e.key;
        entries_.emplace(std::move(k), std::move(e));
    }

private:
    std::unordered_map<std::string, HeapEntry>::iterator min_entry() {
        auto min_it = entries_.begin();
        for (auto it = std::next(entries_.begin()); it != entries_.end(); ++it) {
            const HeapEntry& e = it->second;
            const HeapEntry& m = min_it->second;
            if (e.estimate < m.estimate || (e.estimate == m.estimate && e.key < m.key)) min_it = it;
        }
        return min_it;
    }

    std::uint32_t capacity_;
    std::unordered_map<std::string, HeapEntry> entries_;
};

}  // namespace detail

enum class MergeMode { full, heap_only };

struct UsParams {
    std::uint32_t L = 1;
    std::uint32_t k = 1;
    std::uint32_t r_cs = 1;
    std::uint32_t w_cs = 1;
    std::uint64_t salt = 0;
    bool one_hash = true;   // substring-split hashing vs per-row re-hash
    bool one_layer = true;  // update only the sampled layer vs layers 0..level
};

// Universal sketch: L count-sketch layers under geometric sub-sampling with a
// top-k heavy-hitter heap per layer.
//
// In one-layer mode each key lives at exactly one physical layer (its sample
// level) and all of its occurrences update only that layer; logical layer j
// is the union of physical layers j..L-1. In the naive (multi-layer) mode a
// key updates layers 0..level and each layer keeps its own heap, which is the
// classical construction the one-layer path must stay equivalent to.
class UniversalSketch {
public:
    UniversalSketch() = default;

    explicit UniversalSketch(const UsParams& p) : params_(p) {
        if (p.L < 1 || p.k < 1) throw_usage("universal sketch: L and k must be >= 1");
        layers_.reserve(p.L);
        heaps_.reserve(p.L);
        for (std::uint32_t l = 0; l < p.L; l++) {
            layers_.emplace_back(p.r_cs, p.w_cs, derive_salt(p.salt, l), p.one_hash);
            heaps_.emplace_back(p.k);
        }
    }

    const UsParams& params() const { return params_; }
    const std::vector<CountSketch>& layers() const { return layers_; }
    std::vector<CountSketch>& layers() { return layers_; }
    const detail::LayerHeap& heap(std::uint32_t l) const { return heaps_[l]; }
    std::uint64_t update_count() const { return update_count_; }
    bool counters_complete() const { return counters_complete_; }

    void update(std::string_view key, Digest128 base_digest) {
        const std::uint32_t level = sample_level(base_digest, params_.L);
        if (params_.one_layer) {
            layers_[level].update(base_digest, 1);
            heaps_[level].touch(key, base_digest, double(layers_[level].estimate(base_digest)));
        } else {
            for (std::uint32_t l = 0; l <= level; l++) {
                layers_[l].update(base_digest, 1);
                heaps_[l].touch(key, base_digest, double(layers_[l].estimate(base_digest)));
            }
        }
        update_count_++;
    }

    struct Candidate {
        const HeapEntry* entry = nullptr;
        double estimate = 0.0;
        std::uint32_t level = 0;
    };

    // Logical-layer-j candidates. Estimates are re-read from the counters
    // when they are trusted; after a heap-only merge only the cached values
    // remain meaningful.
    std::vector<Candidate> logical_candidates(std::uint32_t j) const {
        if (j >= params_.L) throw_usage("logical_candidates: layer out of range");
        std::vector<Candidate> out;
        if (params_.one_layer) {
            for (std::uint32_t l = j; l < params_.L; l++) {
                for (const auto& [key, e] : heaps_[l].entries())
                    out.push_back({&e, candidate_estimate(e, l), l});
            }
        } else {
            for (const auto& [key, e] : heaps_[j].entries())
                out.push_back({&e, candidate_estimate(e, j), sample_level(e.digest, params_.L)});
        }
        return out;
    }

    // Frequency estimate for an arbitrary key (whether or not it is in a
    // heap): read from the key's physical layer, which holds all of its mass.
    double frequency_estimate(Digest128 d) const {
        std::uint32_t l = params_.one_layer ? sample_level(d, params_.L) : 0;
        return double(layers_[l].estimate(d));
    }

    // Layered G-sum estimator, bottom layer up:
    //   Y_j = 2 * Y_{j+1} + sum over top-k candidates x of logical layer j of
    //         (1 - 2*[level(x) > j]) * g(f̂_x),
    // with Y_L = 0; the result is max(Y_0, 0). An optional composite-key
    // prefix restricts every candidate sum to one subpopulation.
    double estimate_gsum(const GSumSpec& spec, std::string_view subpop_prefix = {}) const {
        if (!is_stream_polylog(spec.stat)) throw_usage("unsupported statistic: not in Stream-PolyLog");
        double y = 0.0;
        for (std::int64_t j = params_.L - 1; j >= 0; j--) {
            auto cands = filtered_top_k(std::uint32_t(j), subpop_prefix);
            double sum = 0.0;
            for (const auto& c : cands) {
                double term = g_of(spec.stat, c.estimate);
                sum += c.level > std::uint32_t(j) ? -term : term;
            }
            y = 2.0 * y + sum;
        }
        return y < 0.0 ? 0.0 : y;
    }

    std::vector<std::pair<std::string, double>> heavy_hitters(double alpha) const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw_usage("heavy hitters: alpha must be in (0, 1)");
        const double l1 = estimate_gsum({Statistic::l1});
        std::vector<std::pair<std::string, double>> out;
        for (const auto& c : filtered_top_k(0, {}, /*unbounded=*/true)) {
            if (c.estimate >= alpha * l1) out.emplace_back(c.entry->key, c.estimate);
        }
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second > b.second : a.first < b.first;
        });
        return out;
    }

    bool compatible(const UniversalSketch& o) const {
        return params_.L == o.params_.L && params_.k == o.params_.k &&
               params_.r_cs == o.params_.r_cs && params_.w_cs == o.params_.w_cs &&
               params_.salt == o.params_.salt && params_.one_hash == o.params_.one_hash &&
               params_.one_layer == o.params_.one_layer;
    }

    // FULL: counter-wise layer merge, then each heap rebuilt from the union
    // of both heaps' keys re-estimated against the merged counters.
    // HEAP_ONLY: the counters of the larger-L1 operand survive; heaps merge
    // by summing shared keys' cached estimates, truncated to top-k.
    void merge(const UniversalSketch& other, MergeMode mode) {
        if (!compatible(other)) throw_data("incompatible sketches: universal sketch config mismatch");
        if (mode == MergeMode::full) {
            if (!counters_complete_ || !other.counters_complete_)
                throw_data("full merge requires complete counters on both operands");
            for (std::uint32_t l = 0; l < params_.L; l++) layers_[l].merge(other.layers_[l]);
            for (std::uint32_t l = 0; l < params_.L; l++) {
                std::unordered_map<std::string, HeapEntry> merged;
                for (const auto& [key, e] : heaps_[l].entries()) merged.emplace(key, e);
                for (const auto& [key, e] : other.heaps_[l].entries()) merged.emplace(key, e);
                std::vector<HeapEntry> all;
                all.reserve(merged.size());
                for (auto& [key, e] : merged) {
                    e.estimate = double(layers_[l].estimate(e.digest));
                    all.push_back(std::move(e));
                }
                rebuild_heap(heaps_[l], std::move(all));
            }
        } else {
            const double mine = estimate_gsum({Statistic::l1});
            const double theirs = other.estimate_gsum({Statistic::l1});
            if (theirs > mine) layers_ = other.layers_;
            for (std::uint32_t l = 0; l < params_.L; l++) {
                std::unordered_map<std::string, HeapEntry> merged;
                for (const auto& [key, e] : heaps_[l].entries()) {
                    HeapEntry copy = e;
                    copy.estimate = candidate_estimate(e, l);
                    merged.emplace(key, std::move(copy));
                }
                for (const auto& [key, e] : other.heaps_[l].entries()) {
                    double est = other.candidate_estimate(e, l);
                    auto [it, inserted] = merged.emplace(key, HeapEntry{e.key, e.digest, est});
                    if (!inserted) it->second.estimate += est;
                }
                std::vector<HeapEntry> all;
                all.reserve(merged.size());
                for (auto& [key, e] : merged) all.push_back(std::move(e));
                rebuild_heap(heaps_[l], std::move(all));
            }
            counters_complete_ = false;
        }
        update_count_ += other.update_count_;
    }

    // Serialization hooks (see ingest_io).
    void restore_state(std::uint64_t update_count, bool counters_complete,
                       std::vector<std::vector<HeapEntry>> heap_entries) {
        update_count_ = update_count;
        counters_complete_ = counters_complete;
        for (std::uint32_t l = 0; l < params_.L; l++) {
            heaps_[l].clear();
            for (auto& e : heap_entries[l]) heaps_[l].insert_unchecked(std::move(e));
        }
    }

private:
    double candidate_estimate(const HeapEntry& e, std::uint32_t physical_layer) const {
        if (!counters_complete_) return e.estimate;
        return double(layers_[physical_layer].estimate(e.digest));
    }

    std::vector<Candidate> filtered_top_k(std::uint32_t j, std::string_view subpop_prefix,
                                          bool unbounded = false) const {
        std::vector<Candidate> cands = logical_candidates(j);
        if (!subpop_prefix.empty()) {
            std::erase_if(cands, [&](const Candidate& c) {
                return !composite_matches(c.entry->key, subpop_prefix);
            });
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return a.estimate != b.estimate ? a.estimate > b.estimate : a.entry->key < b.entry->key;
        });
        if (!unbounded && cands.size() > params_.k) cands.resize(params_.k);
        return cands;
    }

    static void rebuild_heap(detail::LayerHeap& heap, std::vector<HeapEntry> all) {
        std::sort(all.begin(), all.end(), [](const HeapEntry& a, const HeapEntry& b) {
            return a.estimate != b.estimate ? a.estimate > b.estimate : a.key < b.key;
        });
        if (all.size() > heap.capacity()) all.resize(heap.capacity());
        heap.clear();
        for (auto& e : all) heap.insert_unchecked(std::move(e));
    }

    UsParams params_;
    std::vector<CountSketch> layers_;
    std::vector<detail::LayerHeap> heaps_;
    std::uint64_t update_count_ = 0;
    bool counters_complete_ = true;
};

}  // namespace hydra
