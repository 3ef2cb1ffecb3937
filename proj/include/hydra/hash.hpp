#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

#include "hydra/error.hpp"

namespace hydra {

// One 128-bit digest per update; every row index, column index, sign bit and
// layer-sampling bit is cut out of this value (or out of mix() of it).
//
// Bit layout contract:
//   lo (bits [0,64))   -- layer-sampling field; also feeds sign/column
//                         derivation through mix()
//   hi (bits [64,128)) -- sliced into equal-width fields for row placement
struct Digest128 {
    std::uint64_t lo = 0;
    std::uint64_t hi = 0;

    friend bool operator==(const Digest128&, const Digest128&) = default;
};

// Recorded in sketch file headers; sketches are mergeable only across
// identical hash families.
inline constexpr std::string_view kHashFamilyId = "murmur3_x64_128-seed64/1";

namespace detail {

inline std::uint64_t fmix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

inline std::uint64_t rotl64(std::uint64_t x, int r) { return (x << r) | (x >> (64 - r)); }

inline std::uint64_t load64(const unsigned char* p) {
    std::uint64_t v;
    std::memcpy(&v, p, 8);
    return v;  // little-endian hosts only; asserted in io layer
}

}  // namespace detail

// MurmurHash3 x64-128, extended to a 64-bit seed (both lanes start at the
// seed, as in the reference 32-bit-seed variant).
inline Digest128 digest128(std::string_view input, std::uint64_t seed) {
    const auto* data = reinterpret_cast<const unsigned char*>(input.data());
    const std::size_t len = input.size();
    const std::size_t nblocks = len / 16;

    std::uint64_t h1 = seed;
    std::uint64_t h2 = seed;

    constexpr std::uint64_t c1 = 0x87c37b91114253d5ULL;
    constexpr std::uint64_t c2 = 0x4cf5ad432745937fULL;

    for (std::size_t i = 0; i < nblocks; i++) {
        std::uint64_t k1 = detail::load64(data + i * 16);
        std::uint64_t k2 = detail::load64(data + i * 16 + 8);

        k1 *= c1;
        k1 = detail::rotl64(k1, 31);
        k1 *= c2;
        h1 ^= k1;
        h1 = detail::rotl64(h1, 27);
        h1 += h2;
        h1 = h1 * 5 + 0x52dce729;

        k2 *= c2;
        k2 = detail::rotl64(k2, 33);
        k2 *= c1;
        h2 ^= k2;
        h2 = detail::rotl64(h2, 31);
        h2 += h1;
        h2 = h2 * 5 + 0x38495ab5;
    }

    const unsigned char* tail = data + nblocks * 16;
    std::uint64_t k1 = 0;
    std::uint64_t k2 = 0;
    switch (len & 15) {
        case 15: k2 ^= std::uint64_t(tail[14]) << 48; [[fallthrough]];
        case 14: k2 ^= std::uint64_t(tail[13]) << 40; [[fallthrough]];
        case 13: k2 ^= std::uint64_t(tail[12]) << 32; [[fallthrough]];
        case 12: k2 ^= std::uint64_t(tail[11]) << 24; [[fallthrough]];
        case 11: k2 ^= std::uint64_t(tail[10]) << 16; [[fallthrough]];
        case 10: k2 ^= std::uint64_t(tail[9]) << 8; [[fallthrough]];
        case 9:
            k2 ^= std::uint64_t(tail[8]);
            k2 *= c2;
            k2 = detail::rotl64(k2, 33);
            k2 *= c1;
            h2 ^= k2;
            [[fallthrough]];
        case 8: k1 ^= std::uint64_t(tail[7]) << 56; [[fallthrough]];
        case 7: k1 ^= std::uint64_t(tail[6]) << 48; [[fallthrough]];
        case 6: k1 ^= std::uint64_t(tail[5]) << 40; [[fallthrough]];
        case 5: k1 ^= std::uint64_t(tail[4]) << 32; [[fallthrough]];
        case 4: k1 ^= std::uint64_t(tail[3]) << 24; [[fallthrough]];
        case 3: k1 ^= std::uint64_t(tail[2]) << 16; [[fallthrough]];
        case 2: k1 ^= std::uint64_t(tail[1]) << 8; [[fallthrough]];
        case 1:
            k1 ^= std::uint64_t(tail[0]);
            k1 *= c1;
            k1 = detail::rotl64(k1, 31);
            k1 *= c2;
            h1 ^= k1;
            break;
        case 0: break;
    }

    h1 ^= std::uint64_t(len);
    h2 ^= std::uint64_t(len);
    h1 += h2;
    h2 += h1;
    h1 = detail::fmix64(h1);
    h2 = detail::fmix64(h2);
    h1 += h2;
    h2 += h1;

    return Digest128{h1, h2};
}

// Decorrelates the digest per sketch instance / row without re-hashing the
// key bytes (finalizer-quality mixing, same tail as digest128).
inline Digest128 mix(Digest128 d, std::uint64_t instance_salt) {
    std::uint64_t h1 = d.lo ^ instance_salt;
    std::uint64_t h2 = d.hi ^ (instance_salt * 0x9e3779b97f4a7c15ULL);
    h1 += h2;
    h2 += h1;
    h1 = detail::fmix64(h1);
    h2 = detail::fmix64(h2);
    h1 += h2;
    h2 += h1;
    return Digest128{h1, h2};
}

// True when r equal-width fields of the hi word can each address [0, w).
inline bool split_budget_ok(std::uint32_t r, std::uint64_t w) {
    if (r == 0 || w == 0) return false;
    std::uint32_t need = w <= 1 ? 0 : std::uint32_t(std::bit_width(w - 1));
    return std::uint64_t(r) * need <= 64;
}

// Cuts r row indices in [0, w) out of disjoint bit ranges of the hi word.
// Each field maps to [0, w) by multiply-shift reduction.
inline std::vector<std::uint32_t> split_row_indices(Digest128 d, std::uint32_t r, std::uint64_t w) {
    if (r < 1 || w < 1) throw_usage("split_row_indices: r and w must be >= 1");
    if (!split_budget_ok(r, w))
        throw_usage("split_row_indices: hash budget exceeded (r * ceil(log2 w) > 64)");
    const std::uint32_t width = 64 / r;
    const std::uint64_t mask = width == 64 ? ~0ULL : ((1ULL << width) - 1);
    std::vector<std::uint32_t> out(r);
    for (std::uint32_t i = 0; i < r; i++) {
        std::uint64_t field = (d.hi >> (std::uint64_t(i) * width)) & mask;
        out[i] = std::uint32_t((static_cast<unsigned __int128>(field) * w) >> width);
    }
    return out;
}

// Geometric layer sampling: level l with probability 2^-(l+1), remainder mass
// on L-1. The sampling field is the full lo word, MSB first.
inline std::uint32_t sample_level(Digest128 d, std::uint32_t layer_count) {
    std::uint32_t zeros = std::uint32_t(std::countl_zero(d.lo));
    return zeros < layer_count - 1 ? zeros : layer_count - 1;
}

// Deterministic per-cell / per-layer salt derivation.
inline std::uint64_t derive_salt(std::uint64_t base, std::uint64_t tag) {
    return detail::fmix64(base ^ detail::fmix64(tag + 0x9e3779b97f4a7c15ULL));
}

}  // namespace hydra
