#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "hydra/error.hpp"

namespace hydra {

enum class Statistic {
    l1,
    l2,
    entropy,
    cardinality,
    heavy_hitters,
};

// A statistic together with the per-frequency function g it induces.
// All registered g are monotone nondecreasing with g(0) = 0 and g(f) = O(f^2)
// (Stream-PolyLog membership).
struct GSumSpec {
    Statistic stat = Statistic::l1;
    double alpha = 0.0;  // heavy_hitters threshold fraction

    friend bool operator==(const GSumSpec&, const GSumSpec&) = default;
};

inline GSumSpec parse_statistic(std::string_view name) {
    if (name == "l1") return {Statistic::l1};
    if (name == "l2") return {Statistic::l2};
    if (name == "entropy") return {Statistic::entropy};
    if (name == "cardinality") return {Statistic::cardinality};
    constexpr std::string_view hh = "heavy_hitters:";
    if (name.substr(0, hh.size()) == hh) {
        double alpha = 0.0;
        try {
            alpha = std::stod(std::string(name.substr(hh.size())));
        } catch (const std::exception&) {
            throw_usage("unsupported statistic: " + std::string(name));
        }
        if (!(alpha > 0.0 && alpha < 1.0)) throw_usage("heavy_hitters alpha must be in (0, 1)");
        return {Statistic::heavy_hitters, alpha};
    }
    throw_usage("unsupported statistic: " + std::string(name));
}

inline std::string statistic_name(const GSumSpec& spec) {
    switch (spec.stat) {
        case Statistic::l1: return "l1";
        case Statistic::l2: return "l2";
        case Statistic::entropy: return "entropy";
        case Statistic::cardinality: return "cardinality";
        case Statistic::heavy_hitters: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "heavy_hitters:%g", spec.alpha);
            return buf;
        }
    }
    throw_internal("unknown statistic tag");
}

// g applied to an estimated (real-valued) frequency. Entropy uses the
// f*log2(f) component; the finalizer combines it with L1. Cardinality rounds
// to the nearest integer, so estimates below 0.5 contribute 0. Logs are
// base 2 throughout.
inline double g_of(Statistic stat, double f) {
    if (f <= 0.0) return 0.0;
    switch (stat) {
        case Statistic::l1:
        case Statistic::heavy_hitters: return f;
        case Statistic::l2: return f * f;
        case Statistic::entropy: return f <= 1.0 ? 0.0 : f * std::log2(f);
        case Statistic::cardinality: return f >= 0.5 ? 1.0 : 0.0;
    }
    throw_internal("unknown statistic tag");
}

struct StatisticResult {
    GSumSpec spec;
    double value = 0.0;
    std::map<std::string, double> components;
};

// Entropy decomposes as log2(L1) - (sum f*log2 f)/L1 over exact frequencies;
// sketch noise can push the raw expression slightly out of range, so it is
// clamped to [0, log2(cardinality)] when a cardinality estimate is present.
inline double finalize_entropy(double l1, double flogf,
                               std::optional<double> cardinality = std::nullopt) {
    if (!(l1 > 0.0)) throw_data("undefined entropy: L1 is zero");
    double h = std::log2(l1) - flogf / l1;
    if (h < 0.0) h = 0.0;
    if (cardinality && *cardinality >= 1.0) h = std::min(h, std::log2(*cardinality));
    return h;
}

inline StatisticResult finalize(const GSumSpec& spec, const std::map<std::string, double>& components) {
    StatisticResult res{spec, 0.0, components};
    switch (spec.stat) {
        case Statistic::l1: res.value = components.at("l1"); break;
        case Statistic::l2: res.value = components.at("l2"); break;
        case Statistic::cardinality: res.value = components.at("cardinality"); break;
        case Statistic::heavy_hitters: res.value = components.at("l1"); break;
        case Statistic::entropy: {
            std::optional<double> card;
            if (auto it = components.find("cardinality"); it != components.end()) card = it->second;
            res.value = finalize_entropy(components.at("l1"), components.at("flogf"), card);
            break;
        }
    }
    if (!std::isfinite(res.value)) throw_internal("non-finite statistic result");
    return res;
}

// Registration-time Stream-PolyLog check: monotone nondecreasing and
// g(f) <= f^2 for f >= 1, sampled over integer frequencies.
inline bool is_stream_polylog(Statistic stat, std::uint64_t max_f = 1 << 16) {
    if (g_of(stat, 0.0) != 0.0) return false;
    double prev = 0.0;
    for (std::uint64_t f = 1; f <= max_f; f = f < 64 ? f + 1 : f * 2) {
        double g = g_of(stat, double(f));
        if (g < prev) return false;
        if (f >= 1 && g > double(f) * double(f) + 1e-9) return false;
        prev = g;
    }
    return true;
}

}  // namespace hydra
