#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hydra/error.hpp"

namespace hydra {

inline constexpr std::uint32_t kMaxDimensions = 20;
inline constexpr char kMissingToken[] = "∅";  // literal for absent dimension values

// Binds CSV columns to dimension / metric roles.
struct Schema {
    std::vector<std::string> dimensions;
    std::string metric;
    std::string missing_token = kMissingToken;
};

// One multidimensional observation: D dimension values plus one metric value.
// The metric is opaque bytes; only equality matters to the sketch.
struct DataRecord {
    std::vector<std::string> dims;
    std::string metric;
};

namespace detail {

inline void put_varint(std::string& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(char(std::uint8_t(v) | 0x80));
        v >>= 7;
    }
    out.push_back(char(std::uint8_t(v)));
}

// Returns false on truncated/overlong input.
inline bool get_varint(std::string_view in, std::size_t& pos, std::uint64_t& v) {
    v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
        if (pos >= in.size()) return false;
        std::uint8_t b = std::uint8_t(in[pos++]);
        v |= std::uint64_t(b & 0x7f) << shift;
        if (!(b & 0x80)) return true;
    }
    return false;
}

}  // namespace detail

// Canonical encoding of a conjunction of dimension=value predicates.
// Predicates are kept sorted by dimension index; the encoding is
// length-prefixed (no separator escaping needed) and order-independent of
// the input predicate order.
class SubpopulationKey {
public:
    using Predicate = std::pair<std::uint32_t, std::string>;

    SubpopulationKey() = default;

    explicit SubpopulationKey(std::vector<Predicate> predicates) : predicates_(std::move(predicates)) {
        std::sort(predicates_.begin(), predicates_.end(),
                  [](const Predicate& a, const Predicate& b) { return a.first < b.first; });
        for (std::size_t i = 1; i < predicates_.size(); i++) {
            if (predicates_[i].first == predicates_[i - 1].first)
                throw_usage("subpopulation key: duplicate dimension index");
        }
    }

    const std::vector<Predicate>& predicates() const { return predicates_; }
    bool whole_stream() const { return predicates_.empty(); }

    // Empty predicate list encodes to a fixed 1-byte sentinel (0x00); a
    // non-empty key starts with varint(count) >= 1, so the forms are disjoint.
    std::string encode() const {
        if (predicates_.empty()) return std::string(1, '\0');
        std::string out;
        detail::put_varint(out, predicates_.size());
        for (const auto& [dim, value] : predicates_) {
            detail::put_varint(out, dim);
            detail::put_varint(out, value.size());
            out.append(value);
        }
        return out;
    }

    static SubpopulationKey decode(std::string_view bytes) {
        if (bytes.empty()) throw_data("malformed key: empty");
        if (bytes.size() == 1 && bytes[0] == '\0') return SubpopulationKey{};
        std::size_t pos = 0;
        std::uint64_t count = 0;
        if (!detail::get_varint(bytes, pos, count) || count == 0 || count > kMaxDimensions)
            throw_data("malformed key: bad predicate count");
        std::vector<Predicate> preds;
        preds.reserve(count);
        std::uint64_t prev_dim = 0;
        for (std::uint64_t i = 0; i < count; i++) {
            std::uint64_t dim = 0, len = 0;
            if (!detail::get_varint(bytes, pos, dim)) throw_data("malformed key: truncated dim");
            if (i > 0 && dim <= prev_dim) throw_data("malformed key: dims not strictly increasing");
            if (!detail::get_varint(bytes, pos, len) || pos + len > bytes.size())
                throw_data("malformed key: truncated value");
            preds.emplace_back(std::uint32_t(dim), std::string(bytes.substr(pos, len)));
            pos += len;
            prev_dim = dim;
        }
        if (pos != bytes.size()) throw_data("malformed key: trailing bytes");
        return SubpopulationKey(std::move(preds));
    }

    friend bool operator==(const SubpopulationKey&, const SubpopulationKey&) = default;

private:
    std::vector<Predicate> predicates_;
};

// Expands a record into all 2^D subpopulations it belongs to, ordered by
// subset bitmask (the empty subset first).
inline std::vector<SubpopulationKey> fanout(const DataRecord& rec) {
    const std::size_t d = rec.dims.size();
    if (d > kMaxDimensions) throw_usage("dimensionality cap exceeded (D > 20)");
    std::vector<SubpopulationKey> out;
    out.reserve(std::size_t(1) << d);
    for (std::uint32_t mask = 0; mask < (1u << d); mask++) {
        std::vector<SubpopulationKey::Predicate> preds;
        for (std::uint32_t i = 0; i < d; i++) {
            if (mask & (1u << i)) preds.emplace_back(i, rec.dims[i]);
        }
        out.emplace_back(std::move(preds));
    }
    return out;
}

// Composite key: encoded subpopulation followed by the metric value. The
// subpopulation encoding is self-delimiting, so prefix matching on it is
// injective; this is what lets colliding subpopulations be told apart inside
// the heavy-hitter heaps.
inline std::string make_composite_key(std::string_view encoded_subpop, std::string_view metric) {
    std::string out(encoded_subpop);
    detail::put_varint(out, metric.size());
    out.append(metric);
    return out;
}

inline bool composite_matches(std::string_view composite, std::string_view encoded_subpop) {
    return composite.size() > encoded_subpop.size() &&
           composite.substr(0, encoded_subpop.size()) == encoded_subpop;
}

inline std::string_view composite_metric(std::string_view composite, std::string_view encoded_subpop) {
    std::string_view rest = composite.substr(encoded_subpop.size());
    std::size_t pos = 0;
    std::uint64_t len = 0;
    if (!detail::get_varint(rest, pos, len) || pos + len != rest.size())
        throw_data("malformed composite key");
    return rest.substr(pos, len);
}

}  // namespace hydra
