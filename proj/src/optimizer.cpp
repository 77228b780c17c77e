#include "aoi/optimizer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "aoi/errors.hpp"

namespace aoi {

namespace {

bool close_relative(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

}  // namespace

TotalAge total_age(const SystemConfig& cfg) {
    TotalAge summed;
    for (std::size_t i = 0; i < cfg.streams(); ++i) {
        summed.age += avg_age(cfg, i);
        summed.peak += peak_age(cfg, i);
    }

    const double lambda = cfg.total_rate();
    const double p = cfg.p_lambda();
    double inverse_sum = 0.0;
    for (double pi : cfg.probs()) inverse_sum += 1.0 / pi;
    const double factored = inverse_sum / (lambda * p);
    const double factored_peak =
        factored + static_cast<double>(cfg.streams()) * cfg.service().exp_weighted_mean(lambda) / p;

    if (!close_relative(summed.age, factored, 1e-12) || !close_relative(summed.peak, factored_peak, 1e-12)) {
        throw InvariantViolation(fmt::format("total age routes disagree: sum ({}, {}) vs factored ({}, {})",
                                             summed.age, summed.peak, factored, factored_peak));
    }
    return summed;
}

std::vector<double> random_simplex_point(std::size_t dim, RandomSource& rng) {
    std::vector<double> p(dim);
    double sum = 0.0;
    for (auto& x : p) {
        x = rng.exponential(1.0);
        sum += x;
    }
    for (auto& x : p) x /= sum;
    // Re-normalise so the sum is 1 to rounding before SystemConfig checks it.
    const double again = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& x : p) x /= again;
    return p;
}

AllocationResult optimal_allocation(double total_rate, std::size_t streams, const ServiceDistribution& service,
                                    std::size_t n_random_points, std::uint64_t seed) {
    if (streams < 1) throw DomainError("at least one stream is required");
    const auto m = static_cast<double>(streams);
    AllocationResult result;
    result.p_star.assign(streams, 1.0 / m);
    // Validates total_rate and the service law.
    const SystemConfig fair(total_rate, result.p_star, service);
    const double p = fair.p_lambda();
    result.delta_tot_star = m * m / (total_rate * p);
    result.delta_peak_tot_star = result.delta_tot_star + m * service.exp_weighted_mean(total_rate) / p;

    auto& check = result.verification;
    check.min_margin_off_center = std::numeric_limits<double>::infinity();
    if (streams == 1) return result;

    RandomSource rng(seed);
    for (std::size_t n = 0; n < n_random_points; ++n) {
        const auto point = random_simplex_point(streams, rng);
        const SystemConfig cfg(total_rate, point, service);
        const double total = total_age(cfg).age;
        check.n_random_points += 1;
        check.max_violation = std::max(check.max_violation, result.delta_tot_star - total);
        double spread = 0.0;
        for (double x : point) spread = std::max(spread, std::abs(x - 1.0 / m));
        if (spread > 1e-3) check.min_margin_off_center = std::min(check.min_margin_off_center, total - result.delta_tot_star);
    }
    return result;
}

std::vector<FrontierRow> priority_frontier(double total_rate, std::size_t streams, const ServiceDistribution& service,
                                           std::size_t i, std::span<const double> grid,
                                           std::optional<std::vector<double>> residual_split) {
    if (streams < 2) throw DomainError("priority frontier needs at least two streams");
    if (i >= streams) throw DomainError(fmt::format("stream index {} out of range (M = {})", i, streams));
    if (grid.empty()) throw DomainError("priority frontier grid is empty");
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (!(grid[g] > 0.0 && grid[g] < 1.0))
            throw DomainError(fmt::format("grid value {} outside (0, 1)", grid[g]));
        if (g > 0 && !(grid[g] > grid[g - 1])) throw DomainError("grid values must be strictly increasing");
    }
    std::vector<double> weights(streams - 1, 1.0);
    if (residual_split) {
        if (residual_split->size() != streams - 1)
            throw DomainError(fmt::format("residual split needs {} weights", streams - 1));
        weights = *residual_split;
        for (double w : weights)
            if (!(w > 0.0)) throw DomainError("residual split weights must be positive");
    }
    const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);

    std::vector<FrontierRow> rows;
    rows.reserve(grid.size());
    for (double pi : grid) {
        std::vector<double> probs(streams);
        for (std::size_t j = 0, w = 0; j < streams; ++j) {
            probs[j] = j == i ? pi : (1.0 - pi) * weights[w++] / weight_sum;
        }
        // Absorb rounding into the priority stream's complement.
        double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
        for (auto& x : probs) x /= sum;
        const SystemConfig cfg(total_rate, probs, service);
        const auto totals = total_age(cfg);
        rows.push_back({pi, avg_age(cfg, i), peak_age(cfg, i), totals.age, totals.peak});
    }

    const double center = 1.0 / static_cast<double>(streams);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (!(rows[r].avg_age < rows[r - 1].avg_age) || !(rows[r].peak_age < rows[r - 1].peak_age)) {
            throw InvariantViolation(fmt::format("age of stream {} does not decrease between p = {} and p = {}", i,
                                                 rows[r - 1].p, rows[r].p));
        }
        if (residual_split) continue;
        const bool below = rows[r].p <= center;
        const bool above = rows[r - 1].p >= center;
        if ((below && rows[r].total_age > rows[r - 1].total_age) ||
            (above && rows[r].total_age < rows[r - 1].total_age)) {
            throw InvariantViolation(fmt::format("total age is not minimised at p = 1/M on the grid (p = {} -> {})",
                                                 rows[r - 1].p, rows[r].p));
        }
    }
    return rows;
}

}  // namespace aoi
