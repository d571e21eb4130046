#pragma once

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "karma_ev/model.hpp"

namespace test_util {

/// Strictly positive random policy over the legal bids of every state.
inline std::vector<double> random_policy(const karma_ev::StateSpace& space, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    std::vector<double> pi(space.action_count(), 0.0);
    const std::size_t n = space.individual_count();
    for (int t = 0; t < space.n_intervals(); ++t)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t off = static_cast<std::size_t>(t) * space.actions_per_interval() + space.action_offset(i);
            double z = 0.0;
            for (int a = 0; a < space.action_count(i); ++a) z += pi[off + a] = unif(rng);
            for (int a = 0; a < space.action_count(i); ++a) pi[off + a] /= z;
        }
    return pi;
}

/// Random distribution over the karma-free part of each interval, karma
/// drawn from `karma` independently.
inline std::vector<double> random_distribution(const karma_ev::StateSpace& space, std::mt19937_64& rng,
                                               std::span<const double> karma)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t n = space.individual_count();
    const std::size_t n_k = static_cast<std::size_t>(space.params().n_karma());
    std::vector<double> d(space.size(), 0.0);
    for (int t = 0; t < space.n_intervals(); ++t) {
        double z = 0.0;
        std::vector<double> w(n / n_k);
        for (double& x : w) z += x = unif(rng);
        for (std::size_t b = 0; b < w.size(); ++b)
            for (std::size_t k = 0; k < n_k; ++k)
                d[static_cast<std::size_t>(t) * n + b * n_k + k] = w[b] / z * karma[k];
    }
    return d;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace test_util
