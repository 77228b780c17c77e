#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "aoi/analytic.hpp"
#include "aoi/random.hpp"

namespace aoi::testing {

// Three streams, lambda = 1.5, p = (0.5, 0.3, 0.2), Exponential(1):
// P_lambda = 0.4 and E[S e^{-lambda S}] = 0.16.
inline SystemConfig reference_config() {
    return SystemConfig(1.5, {0.5, 0.3, 0.2}, ServiceDistribution::exponential(1.0));
}

// Random service law with mean in [0.1, 0.8].
inline ServiceDistribution random_service(RandomSource& rng) {
    const double mean = 0.1 + 0.7 * rng.uniform();
    switch (static_cast<int>(rng.uniform() * 4.0)) {
        case 0: return ServiceDistribution::exponential(1.0 / mean);
        case 1: {
            const double shape = 0.5 + 3.5 * rng.uniform();
            return ServiceDistribution::gamma(shape, mean / shape);
        }
        case 2: return ServiceDistribution::deterministic(mean);
        default: {
            const double lower = mean * rng.uniform();
            return ServiceDistribution::uniform(lower, 2.0 * mean - lower);
        }
    }
}

// M in 1..5, lambda in [0.5, 2], every p_i >= 0.5 / M. Keeps E[Y] below a
// few hundred so fixed-step numeric derivatives stay accurate.
inline SystemConfig random_config(RandomSource& rng) {
    const auto m = static_cast<std::size_t>(1 + rng.uniform() * 5.0);
    std::vector<double> p(m);
    double sum = 0.0;
    for (auto& x : p) {
        x = rng.exponential(1.0);
        sum += x;
    }
    for (auto& x : p) x = 0.5 * x / sum + 0.5 / static_cast<double>(m);
    double again = 0.0;
    for (double x : p) again += x;
    for (auto& x : p) x /= again;
    const double lambda = 0.5 + 1.5 * rng.uniform();
    return SystemConfig(lambda, std::move(p), random_service(rng));
}

inline bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace aoi::testing
