#pragma once

#include "kfmot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace kfmot {

struct GammaParams {
    double shape = 1.0;  ///< k
    double scale = 1.0;  ///< theta
};

struct GaussianParams {
    double mean = 0.0;
    double stddev = 1.0;
};

/// Regularized lower incomplete gamma P(a, x): series below a + 1, Lentz
/// continued fraction for the upper tail otherwise.
inline double regularized_lower_gamma(double a, double x) {
    if (!(a > 0.0)) throw InvalidArgument("regularized_lower_gamma: shape must be > 0");
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    constexpr double eps = 1e-16;
    constexpr int max_iter = 10000;
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a, term = 1.0 / a, sum = term;
        for (int i = 0; i < max_iter; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * eps) break;
        }
        return std::clamp(sum * std::exp(log_prefix), 0.0, 1.0);
    }
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= max_iter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return std::clamp(1.0 - std::exp(log_prefix) * h, 0.0, 1.0);
}

inline double gamma_cdf(const GammaParams& g, double x) {
    return regularized_lower_gamma(g.shape, x / g.scale);
}

/// Inverse CDF by bisection on the regularized incomplete gamma.
inline double gamma_quantile(const GammaParams& g, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("gamma_quantile: q must lie in (0, 1)");
    if (!(g.shape > 0.0 && g.scale > 0.0)) throw InvalidArgument("gamma_quantile: bad parameters");
    double lo = 0.0;
    double hi = std::max(1.0, g.shape);
    while (regularized_lower_gamma(g.shape, hi) < q) hi *= 2.0;
    for (int i = 0; i < 400 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_lower_gamma(g.shape, mid) < q) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi) * g.scale;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("normal_quantile: q must lie in (0, 1)");
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (normal_cdf(mid) < q) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline double gaussian_quantile(const GaussianParams& g, double q) {
    return g.mean + normal_quantile(q) * g.stddev;
}

namespace detail {

inline void moments(std::span<const double> xs, double& mean, double& var) {
    const double n = static_cast<double>(xs.size());
    mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    var = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
}

}  // namespace detail

/// Method-of-moments Gamma fit: k = mean^2 / var, theta = var / mean.
/// Throws DegenerateVariance when the sample is (numerically) a point mass.
inline GammaParams fit_gamma(std::span<const double> xs, std::size_t min_samples = 2) {
    if (xs.size() < std::max<std::size_t>(min_samples, 2))
        throw InsufficientData("fit_gamma: not enough samples");
    double mean = 0, var = 0;
    detail::moments(xs, mean, var);
    if (!(mean > 0.0) || var <= 1e-12 * mean * mean)
        throw DegenerateVariance("fit_gamma: zero variance or non-positive mean");
    return {mean * mean / var, var / mean};
}

inline GaussianParams fit_gaussian(std::span<const double> xs, std::size_t min_samples = 2) {
    if (xs.size() < std::max<std::size_t>(min_samples, 2))
        throw InsufficientData("fit_gaussian: not enough samples");
    double mean = 0, var = 0;
    detail::moments(xs, mean, var);
    if (var <= 1e-12 * std::max(mean * mean, 1e-300))
        throw DegenerateVariance("fit_gaussian: zero variance");
    return {mean, std::sqrt(var)};
}

/// Linear-interpolation empirical quantile (Hyndman-Fan type 7) of sorted data.
inline double empirical_quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw InsufficientData("empirical quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace kfmot
