#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "hydra/error.hpp"

namespace hydra {

// Full structural configuration of a sketch grid, plus the accuracy targets
// it was derived from. M = w * w_cs is the counter budget ("units of w_us").
struct HydraConfig {
    // structure
    std::uint32_t r = 1;      // grid rows
    std::uint32_t w = 1;      // grid columns
    std::uint32_t r_cs = 1;   // count-sketch rows per layer
    std::uint32_t w_cs = 1;   // count-sketch columns per layer
    std::uint32_t L = 1;      // universal-sketch layers
    std::uint32_t k = 1;      // heavy-hitter heap capacity per layer
    std::uint64_t stream_seed = 0;
    std::uint32_t max_key_bytes = 128;  // serialized heap slot key capacity

    // derived accuracy surface
    double eps = 1.0;         // collision noise factor, ~1/w
    double delta = 0.5;       // grid failure probability
    double eps_us = 1.0;      // universal-sketch relative error, ~1/sqrt(w_cs)
    double delta_us = 0.5;    // universal-sketch failure probability
    double gmin_ratio = 1.0;  // G_min / G_S the plan targeted

    std::uint64_t counter_budget() const { return std::uint64_t(w) * w_cs; }

    bool same_shape(const HydraConfig& o) const {
        return r == o.r && w == o.w && r_cs == o.r_cs && w_cs == o.w_cs && L == o.L && k == o.k &&
               max_key_bytes == o.max_key_bytes && stream_seed == o.stream_seed;
    }
};

struct PlanTargets {
    double delta = 0.1;       // 1 - confidence
    double eps_us = 0.1;      // universal-sketch relative error target
    double gmin_ratio = 1e-3; // G_min / G_S
    double n_us = 2.0;        // expected distinct subpopulations per cell
    std::uint64_t stream_seed = 0;
};

// Guarantee band at a given G_S/G_i ratio: relative error in
// [-eps_us, eps_us + eps * ratio] with probability 1 - delta.
struct ErrorBound {
    double lower = 0.0;
    double upper = 0.0;
    double confidence = 0.0;
};

inline ErrorBound error_bound(const HydraConfig& cfg, double g_ratio) {
    if (g_ratio < 1.0) throw_usage("error bound: G_S/G_i ratio must be >= 1");
    return {-cfg.eps_us, cfg.eps_us + cfg.eps * g_ratio, 1.0 - cfg.delta};
}

namespace detail {

inline std::uint32_t ceil_pow2_u32(double v) {
    if (v <= 1.0) return 1;
    return std::uint32_t(std::bit_ceil(std::uint64_t(std::ceil(v))));
}

// Row rule from the confidence target; log2(1/0.1) = 3.32 maps to 3 rows.
inline std::uint32_t rows_for_delta(double delta) {
    auto r = std::uint32_t(std::llround(std::log2(1.0 / delta)));
    return r < 1 ? 1 : r;
}

}  // namespace detail

// Configuration planner: minimizes the upper error bound
// E = eps_us + eps * G_S/G_min under the counter budget M = w * w_cs,
// giving M = 2 / (eps_us^3 * gmin_ratio), w_cs = (M * gmin_ratio)^(2/3),
// w = M / w_cs. Widths round up to powers of two; Theta constants are 1.
inline HydraConfig plan(const PlanTargets& t) {
    if (!(t.delta > 0.0 && t.delta < 1.0)) throw_usage("plan: delta must be in (0, 1)");
    if (!(t.eps_us > 0.0 && t.eps_us < 1.0)) throw_usage("plan: eps_us must be in (0, 1)");
    if (!(t.gmin_ratio > 0.0 && t.gmin_ratio < 1.0)) throw_usage("plan: gmin_ratio must be in (0, 1)");
    if (!(t.n_us >= 1.0)) throw_usage("plan: n_us must be >= 1");

    const double m = 2.0 / (t.eps_us * t.eps_us * t.eps_us * t.gmin_ratio);
    const double w_cs_raw = std::pow(m * t.gmin_ratio, 2.0 / 3.0);
    const double w_raw = m / w_cs_raw;
    if (w_cs_raw < 1.0 || w_raw < 1.0) throw_usage("plan: targets imply degenerate widths");

    HydraConfig cfg;
    cfg.w_cs = detail::ceil_pow2_u32(w_cs_raw);
    cfg.w = detail::ceil_pow2_u32(w_raw);
    cfg.r = detail::rows_for_delta(t.delta);
    cfg.r_cs = detail::rows_for_delta(t.delta);
    cfg.L = std::max<std::uint32_t>(1, std::uint32_t(std::ceil(std::log2(std::max(t.n_us, 2.0)))));
    cfg.k = std::uint32_t(std::ceil(1.0 / (t.eps_us * t.eps_us)));
    cfg.stream_seed = t.stream_seed;

    cfg.eps = 1.0 / double(cfg.w);
    cfg.delta = t.delta;
    cfg.eps_us = t.eps_us;
    cfg.delta_us = t.delta;
    cfg.gmin_ratio = t.gmin_ratio;
    return cfg;
}

}  // namespace hydra
