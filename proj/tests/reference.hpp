#pragma once

// Reference values for tests, computed from the model definitions with the
// standard library RNG rather than through the library's own code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace ref {

inline double Phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Inverse of Phi by bisection; slow but independent.
inline double Phi_inv(double u) {
    double lo = -40.0, hi = 40.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (Phi(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Gaussian copula on Uniform(lo_k, hi_k) marginals, correlation rho.
struct Copula {
    double lo1 = 0.2, hi1 = 0.4, lo2 = 0.3, hi2 = 0.5, rho = 0.0;

    double share1(double z) const { return lo1 + (hi1 - lo1) * Phi(z); }
    double share2(double z) const { return lo2 + (hi2 - lo2) * Phi(z); }
    double latent1(double a) const { return Phi_inv((a - lo1) / (hi1 - lo1)); }
    double latent2(double a) const { return Phi_inv((a - lo2) / (hi2 - lo2)); }

    // Monte Carlo of P(a_1 <= t | a_2 = a2) through the latent normal
    // regression z_1 | z_2 ~ N(rho z_2, 1 - rho^2).
    double cond_cdf_a1(double t, double a2, int draws, unsigned seed) const {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> nd;
        const double z2 = latent2(a2);
        const double s = std::sqrt(1.0 - rho * rho);
        int hits = 0;
        for (int k = 0; k < draws; ++k)
            if (share1(rho * z2 + s * nd(gen)) <= t) ++hits;
        return static_cast<double>(hits) / draws;
    }
    // Same with roles exchanged: P(a_2 <= t | a_1 = a1).
    double cond_cdf_a2(double t, double a1, int draws, unsigned seed) const {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> nd;
        const double z1 = latent1(a1);
        const double s = std::sqrt(1.0 - rho * rho);
        int hits = 0;
        for (int k = 0; k < draws; ++k)
            if (share2(rho * z1 + s * nd(gen)) <= t) ++hits;
        return static_cast<double>(hits) / draws;
    }
    // Sample quantile of a_1 | a_2 = a2 from draws.
    double cond_quantile_a1(double level, double a2, int draws, unsigned seed) const {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> nd;
        const double z2 = latent2(a2);
        const double s = std::sqrt(1.0 - rho * rho);
        std::vector<double> v(static_cast<std::size_t>(draws));
        for (auto& x : v) x = share1(rho * z2 + s * nd(gen));
        const auto k = static_cast<std::size_t>(level * (draws - 1));
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
        return v[k];
    }
};

// Central difference with step h.
inline double central(const std::function<double(double)>& f, double t, double h) {
    return (f(t + h) - f(t - h)) / (2.0 * h);
}

// Ranks (0-based, no ties expected) and Spearman correlation.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n - 1.0) / 2.0;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (rx[k] - mean) * (ry[k] - mean);
        sxx += (rx[k] - mean) * (rx[k] - mean);
        syy += (ry[k] - mean) * (ry[k] - mean);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < x.size(); ++k) mx += x[k], my += y[k];
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
        syy += (y[k] - my) * (y[k] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace ref
