#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace hydra::test {

inline std::string random_key(std::mt19937_64& rng, std::size_t min_len = 1, std::size_t max_len = 24) {
    std::uniform_int_distribution<std::size_t> len_dist(min_len, max_len);
    std::uniform_int_distribution<int> ch('a', 'z');
    std::string s(len_dist(rng), '\0');
    for (auto& c : s) c = char(ch(rng));
    return s;
}

// Chi-square statistic of observed counts against a uniform expectation.
inline double chi_square_uniform(const std::vector<std::uint64_t>& counts, double total) {
    double expected = total / double(counts.size());
    double chi2 = 0.0;
    for (auto c : counts) {
        double d = double(c) - expected;
        chi2 += d * d / expected;
    }
    return chi2;
}

// Upper critical values at p = 0.01 for the degrees of freedom used in tests.
inline double chi2_critical_p01(std::size_t df) {
    switch (df) {
        case 7: return 18.48;
        case 15: return 30.58;
        case 31: return 52.19;
        case 63: return 92.01;
        case 127: return 166.99;
        case 255: return 310.46;
        default: return 0.0;  // extend the table as needed
    }
}

}  // namespace hydra::test
