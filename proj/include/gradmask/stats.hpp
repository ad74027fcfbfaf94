#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "gradmask/rng.hpp"

namespace gradmask::stats {

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean: empty input");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample variance (n-1 denominator); 0 for a single value.
inline double sample_variance(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("sample_variance: empty input");
    if (v.size() == 1) return 0.0;
    const double m = mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return acc / static_cast<double>(v.size() - 1);
}

inline double sample_stddev(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

inline double standard_error(const std::vector<double>& v) {
    return sample_stddev(v) / std::sqrt(static_cast<double>(v.size()));
}

// Ranks with ties sharing the average rank.
inline std::vector<double> ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = shared;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson: bad input");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

// One-sided permutation test for a negative Spearman correlation:
// p = P(rho_perm <= rho_observed) under random pairings.
inline double spearman_negative_pvalue(const std::vector<double>& x, const std::vector<double>& y,
                                       int permutations = 20000, std::uint64_t seed = 12345) {
    const double rho_obs = spearman_rho(x, y);
    const std::vector<double> rx = ranks(x);
    std::vector<double> ry = ranks(y);
    Rng rng(seed);
    int at_most = 0;
    for (int p = 0; p < permutations; ++p) {
        for (std::size_t i = ry.size(); i > 1; --i)
            std::swap(ry[i - 1], ry[rng.uniform_int(0, static_cast<std::int64_t>(i) - 1)]);
        if (pearson(rx, ry) <= rho_obs) ++at_most;
    }
    return (at_most + 1.0) / (permutations + 1.0);
}

// Chi-squared statistic of a 2x2 contingency table. df = 1; the alpha=0.01
// critical value is 6.635.
inline double chi2_2x2(double a, double b, double c, double d) {
    const double n = a + b + c + d;
    const double r0 = a + b, r1 = c + d, c0 = a + c, c1 = b + d;
    if (r0 == 0 || r1 == 0 || c0 == 0 || c1 == 0) return 0.0;
    const double det = a * d - b * c;
    return n * det * det / (r0 * r1 * c0 * c1);
}

constexpr double kChi2Df1Alpha01 = 6.634896601021215;

}  // namespace gradmask::stats
