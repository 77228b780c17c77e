#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aoi/analytic.hpp"
#include "aoi/random.hpp"

namespace aoi {

struct TotalAge {
    double age = 0.0;   // sum of per-stream average ages
    double peak = 0.0;  // sum of per-stream peak ages
};

// Sum over streams, cross-checked against the factored form
// (1 / (lambda P_lambda)) sum 1/p_i (+ M E[S e^{-lambda S}] / P_lambda);
// InvariantViolation beyond 1e-12 relative.
TotalAge total_age(const SystemConfig& cfg);

struct AllocationVerification {
    std::size_t n_random_points = 0;
    // max(0, optimum - total age) over the sample; 0 when no sampled point
    // beats the fair allocation.
    double max_violation = 0.0;
    // Smallest total-age excess over the optimum among sampled points with
    // max |p_i - 1/M| > 1e-3 (+inf when there are none).
    double min_margin_off_center = 0.0;
};

struct AllocationResult {
    std::vector<double> p_star;
    double delta_tot_star = 0.0;
    double delta_peak_tot_star = 0.0;
    AllocationVerification verification;
};

// Fair allocation p_i = 1/M with total age M^2 / (lambda P_lambda), certified
// by sampling n_random_points uniform points of the simplex interior.
AllocationResult optimal_allocation(double total_rate, std::size_t streams, const ServiceDistribution& service,
                                    std::size_t n_random_points = 1000, std::uint64_t seed = 1);

// Uniform point in the interior of the probability simplex (normalised
// exponentials).
std::vector<double> random_simplex_point(std::size_t dim, RandomSource& rng);

struct FrontierRow {
    double p = 0.0;
    double avg_age = 0.0;     // of the prioritised stream
    double peak_age = 0.0;    // of the prioritised stream
    double total_age = 0.0;
    double total_peak_age = 0.0;
};

// Average age of stream i and the total age as p_i moves over `grid`
// (strictly increasing, inside (0, 1)). The remaining mass goes to the other
// streams equally, or in the proportions of `residual_split` (M - 1 positive
// weights) when given. Checks on the output: the stream's age strictly
// decreases, and with the equal split the total age decreases up to 1/M and
// increases after it.
std::vector<FrontierRow> priority_frontier(double total_rate, std::size_t streams, const ServiceDistribution& service,
                                           std::size_t i, std::span<const double> grid,
                                           std::optional<std::vector<double>> residual_split = std::nullopt);

}  // namespace aoi
