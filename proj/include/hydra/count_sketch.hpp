#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "hydra/error.hpp"
#include "hydra/hash.hpp"

namespace hydra {

// Count-Sketch: r_cs x w_cs signed counters, median-of-rows estimator.
// Column and sign for a (row, key) pair are cut from disjoint bit ranges of
// mix(key_digest, salt ^ row): column from the hi word (multiply-shift),
// sign from the lo word.
//
// one_hash = false switches to re-hashing the digest bytes per row instead of
// mixing, for benchmarking the single-hash optimization. Both modes are
// deterministic; sketches in different modes are not mergeable.
class CountSketch {
public:
    CountSketch() = default;

    CountSketch(std::uint32_t rows, std::uint32_t cols, std::uint64_t salt, bool one_hash = true)
        : rows_(rows), cols_(cols), salt_(salt), one_hash_(one_hash),
          counters_(std::size_t(rows) * cols, 0) {
        if (rows < 1 || cols < 1) throw_usage("count sketch: rows and cols must be >= 1");
    }

    std::uint32_t rows() const { return rows_; }
    std::uint32_t cols() const { return cols_; }
    std::uint64_t salt() const { return salt_; }
    bool one_hash() const { return one_hash_; }
    const std::vector<std::int64_t>& counters() const { return counters_; }
    std::vector<std::int64_t>& counters() { return counters_; }

    void update(Digest128 key_digest, std::int64_t delta) {
        for (std::uint32_t row = 0; row < rows_; row++) {
            auto [col, sign] = slot(key_digest, row);
            std::int64_t& c = counters_[std::size_t(row) * cols_ + col];
            if (__builtin_add_overflow(c, sign * delta, &c))
                throw_internal("count sketch counter overflow");
        }
    }

    // Lower median over rows of sign * counter; unbiased estimate of the
    // true frequency.
    std::int64_t estimate(Digest128 key_digest) const {
        std::vector<std::int64_t> per_row(rows_);
        for (std::uint32_t row = 0; row < rows_; row++) {
            auto [col, sign] = slot(key_digest, row);
            per_row[row] = sign * counters_[std::size_t(row) * cols_ + col];
        }
        auto mid = per_row.begin() + (rows_ - 1) / 2;
        std::nth_element(per_row.begin(), mid, per_row.end());
        return *mid;
    }

    bool compatible(const CountSketch& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && salt_ == other.salt_ &&
               one_hash_ == other.one_hash_;
    }

    // Counter-wise sum; exact linearity under stream partitioning.
    void merge(const CountSketch& other) {
        if (!compatible(other)) throw_data("incompatible sketches: count sketch shape/salt mismatch");
        for (std::size_t i = 0; i < counters_.size(); i++) {
            if (__builtin_add_overflow(counters_[i], other.counters_[i], &counters_[i]))
                throw_internal("count sketch counter overflow on merge");
        }
    }

private:
    std::pair<std::uint32_t, std::int64_t> slot(Digest128 d, std::uint32_t row) const {
        Digest128 m;
        if (one_hash_) {
            m = mix(d, salt_ ^ row);
        } else {
            char buf[16];
            std::memcpy(buf, &d.lo, 8);
            std::memcpy(buf + 8, &d.hi, 8);
            m = digest128({buf, 16}, salt_ ^ row);
        }
        auto col = std::uint32_t((static_cast<unsigned __int128>(m.hi) * cols_) >> 64);
        std::int64_t sign = (m.lo >> 63) ? 1 : -1;
        return {col, sign};
    }

    std::uint32_t rows_ = 0;
    std::uint32_t cols_ = 0;
    std::uint64_t salt_ = 0;
    bool one_hash_ = true;
    std::vector<std::int64_t> counters_;
};

}  // namespace hydra
