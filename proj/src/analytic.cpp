#include "aoi/analytic.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "aoi/errors.hpp"

namespace aoi {

namespace {

constexpr double kPoleTolerance = 1e-12;
constexpr double kRouteTolerance = 1e-9;

bool close_relative(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

void require_below_total_rate(const SystemConfig& cfg, double s) {
    if (!(s < cfg.total_rate())) {
        throw DomainError(fmt::format("clock MGF argument s = {} must be below the total rate {}", s,
                                      cfg.total_rate()));
    }
}

}  // namespace

SystemConfig::SystemConfig(double total_rate, std::vector<double> stream_probs, ServiceDistribution service)
    : total_rate_(total_rate), probs_(std::move(stream_probs)), service_(std::move(service)), p_lambda_(0.0) {
    if (!(std::isfinite(total_rate_) && total_rate_ > 0.0)) {
        throw DomainError(fmt::format("total_rate must be positive, got {}", total_rate_));
    }
    if (probs_.empty()) throw DomainError("at least one stream is required");
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        if (!(std::isfinite(probs_[i]) && probs_[i] > 0.0)) {
            throw DomainError(fmt::format("stream probability p[{}] = {} must be positive", i, probs_[i]));
        }
    }
    double sum = std::accumulate(probs_.begin(), probs_.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-12) {
        throw DomainError(fmt::format("stream probabilities sum to {}, expected 1", sum));
    }
    p_lambda_ = service_.laplace(total_rate_);
    if (!(p_lambda_ > 0.0)) {
        throw DomainError(fmt::format("P_lambda underflows to {} at lambda = {}", p_lambda_, total_rate_));
    }
}

SystemConfig SystemConfig::from_rates(std::span<const double> stream_rates, ServiceDistribution service) {
    if (stream_rates.empty()) throw DomainError("at least one stream is required");
    for (std::size_t i = 0; i < stream_rates.size(); ++i) {
        if (!(std::isfinite(stream_rates[i]) && stream_rates[i] > 0.0)) {
            throw DomainError(fmt::format("stream rate [{}] = {} must be positive", i, stream_rates[i]));
        }
    }
    double total = std::accumulate(stream_rates.begin(), stream_rates.end(), 0.0);
    std::vector<double> probs;
    probs.reserve(stream_rates.size());
    for (double r : stream_rates) probs.push_back(r / total);
    return SystemConfig(total, std::move(probs), std::move(service));
}

void SystemConfig::check_stream(std::size_t i) const {
    if (i >= probs_.size()) {
        throw DomainError(fmt::format("stream index {} out of range (M = {})", i, probs_.size()));
    }
}

double SystemConfig::prob(std::size_t i) const {
    check_stream(i);
    return probs_[i];
}

double SystemConfig::stream_rate(std::size_t i) const {
    check_stream(i);
    return total_rate_ * probs_[i];
}

double avg_age(const SystemConfig& cfg, std::size_t i) {
    return 1.0 / (cfg.stream_rate(i) * cfg.p_lambda());
}

double peak_age(const SystemConfig& cfg, std::size_t i) {
    return avg_age(cfg, i) + cfg.service().exp_weighted_mean(cfg.total_rate()) / cfg.p_lambda();
}

double system_time_mgf(const SystemConfig& cfg, double s) {
    if (s == 0.0) return 1.0;
    return cfg.service().laplace(cfg.total_rate() - s) / cfg.p_lambda();
}

double interdeparture_mgf(const SystemConfig& cfg, std::size_t i, double s) {
    const double rate_i = cfg.stream_rate(i);
    if (s == 0.0) return 1.0;
    const auto& service = cfg.service();
    const double lambda = cfg.total_rate();
    auto denominator = [&](double x) { return rate_i * service.laplace(lambda - x) - x; };

    const double numerator = rate_i * service.laplace(lambda - s);
    const double den = numerator - s;
    if (s > 0.0) {
        // The denominator is convex in s and positive at 0, so the MGF is
        // finite up to its first zero. Find the minimum over [0, s] by
        // ternary search to rule out a zero crossing before s.
        double lo = 0.0, hi = s;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * s; ++it) {
            double m1 = lo + (hi - lo) / 3.0;
            double m2 = hi - (hi - lo) / 3.0;
            if (denominator(m1) < denominator(m2)) hi = m2;
            else lo = m1;
        }
        double min_den = std::min(denominator(0.5 * (lo + hi)), den);
        if (min_den <= kPoleTolerance) {
            throw PoleError(fmt::format(
                "interdeparture MGF of stream {} diverges at s = {} (beyond the abscissa of convergence)", i, s));
        }
    }
    if (std::abs(den) < kPoleTolerance) {
        throw PoleError(fmt::format("interdeparture MGF of stream {} has a pole near s = {}", i, s));
    }
    return numerator / den;
}

double clock_mgf_a(const SystemConfig& cfg, double s) {
    require_below_total_rate(cfg, s);
    if (s == 0.0) return 1.0;
    const double lambda = cfg.total_rate();
    return lambda / (lambda - s);
}

double clock_mgf_b(const SystemConfig& cfg, double s) {
    require_below_total_rate(cfg, s);
    const double p = cfg.p_lambda();
    if (!(1.0 - p > 0.0)) throw DomainError("clock B is undefined when the service beats every arrival (P_lambda = 1)");
    if (s == 0.0) return 1.0;
    const double lambda = cfg.total_rate();
    return lambda * (1.0 - cfg.service().laplace(lambda - s)) / ((lambda - s) * (1.0 - p));
}

double moments_from_mgf(const std::function<double(double)>& mgf, int order) {
    constexpr double h = 1e-4;
    if (order != 1 && order != 2) throw DomainError(fmt::format("moment order must be 1 or 2, got {}", order));
    auto difference = [&](double step) {
        if (order == 1) return (mgf(step) - mgf(-step)) / (2.0 * step);
        return (mgf(step) - 2.0 * mgf(0.0) + mgf(-step)) / (step * step);
    };
    const double coarse = difference(h);
    const double fine = difference(h / 2.0);
    return (4.0 * fine - coarse) / 3.0;
}

double mean_system_time(const SystemConfig& cfg) {
    return cfg.service().exp_weighted_mean(cfg.total_rate()) / cfg.p_lambda();
}

double mean_interdeparture(const SystemConfig& cfg, std::size_t i) {
    return 1.0 / (cfg.stream_rate(i) * cfg.p_lambda());
}

double second_moment_interdeparture(const SystemConfig& cfg, std::size_t i) {
    const double rate_i = cfg.stream_rate(i);
    const double p = cfg.p_lambda();
    const double weighted = cfg.service().exp_weighted_mean(cfg.total_rate());
    return 2.0 * (-weighted / (rate_i * p * p) + 1.0 / (rate_i * rate_i * p * p));
}

AgeReport age_report(const SystemConfig& cfg) {
    AgeReport report;
    report.streams.reserve(cfg.streams());
    const double mean_t = mean_system_time(cfg);
    for (std::size_t i = 0; i < cfg.streams(); ++i) {
        StreamMetrics m;
        m.stream_rate = cfg.stream_rate(i);
        m.prob = cfg.prob(i);
        m.mean_system_time = mean_t;
        m.mean_interdeparture = mean_interdeparture(cfg, i);
        m.second_moment_interdeparture = second_moment_interdeparture(cfg, i);
        m.delivery_rate = 1.0 / m.mean_interdeparture;
        m.avg_age = avg_age(cfg, i);
        m.peak_age = peak_age(cfg, i);

        const double age_from_moments =
            m.mean_system_time + m.second_moment_interdeparture / (2.0 * m.mean_interdeparture);
        const double peak_from_moments = m.mean_system_time + m.mean_interdeparture;
        if (!close_relative(m.avg_age, age_from_moments, kRouteTolerance)) {
            throw InvariantViolation(fmt::format("stream {}: average age {} disagrees with moment route {}", i,
                                                 m.avg_age, age_from_moments));
        }
        if (!close_relative(m.peak_age, peak_from_moments, kRouteTolerance)) {
            throw InvariantViolation(fmt::format("stream {}: peak age {} disagrees with moment route {}", i,
                                                 m.peak_age, peak_from_moments));
        }
        report.total_age += m.avg_age;
        report.total_peak_age += m.peak_age;
        report.streams.push_back(m);
    }
    return report;
}

}  // namespace aoi
