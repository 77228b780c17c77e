#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "aoi/distributions.hpp"

namespace aoi {

// Total generation rate lambda split over M streams with probabilities p_i,
// all served by one preemptive server with a common service law.
class SystemConfig {
public:
    // Throws DomainError unless lambda > 0, M >= 1, every p_i > 0 and
    // sum p_i = 1 within 1e-12.
    SystemConfig(double total_rate, std::vector<double> stream_probs, ServiceDistribution service);

    // Per-stream rates lambda_i; lambda := sum lambda_i, p_i := lambda_i / lambda.
    static SystemConfig from_rates(std::span<const double> stream_rates, ServiceDistribution service);

    double total_rate() const { return total_rate_; }
    std::size_t streams() const { return probs_.size(); }
    std::span<const double> probs() const { return probs_; }
    double prob(std::size_t i) const;
    double stream_rate(std::size_t i) const;
    const ServiceDistribution& service() const { return service_; }

    // P_lambda = E[exp(-lambda S)], the probability that a service beats the
    // next arrival.
    double p_lambda() const { return p_lambda_; }

    // Throws DomainError when i >= M.
    void check_stream(std::size_t i) const;

private:
    double total_rate_;
    std::vector<double> probs_;
    ServiceDistribution service_;
    double p_lambda_;
};

struct StreamMetrics {
    double stream_rate = 0.0;
    double prob = 0.0;
    double avg_age = 0.0;
    double peak_age = 0.0;
    double delivery_rate = 0.0;
    double mean_system_time = 0.0;
    double mean_interdeparture = 0.0;
    double second_moment_interdeparture = 0.0;
};

struct AgeReport {
    std::vector<StreamMetrics> streams;
    double total_age = 0.0;
    double total_peak_age = 0.0;
};

// Stream indices are zero-based throughout the library.

double avg_age(const SystemConfig& cfg, std::size_t i);
double peak_age(const SystemConfig& cfg, std::size_t i);

// MGF of the system time of a delivered packet, P_{lambda-s} / P_lambda.
// Identical for every stream.
double system_time_mgf(const SystemConfig& cfg, double s);

// MGF of the gap between consecutive deliveries of stream i,
// lambda_i P_{lambda-s} / (lambda_i P_{lambda-s} - s). For s > 0 the argument
// must lie below the first zero of the denominator (the abscissa of
// convergence); otherwise PoleError.
double interdeparture_mgf(const SystemConfig& cfg, std::size_t i, double s);

// MGFs of the conditional clock values on the interdeparture chain.
// A (own-stream arrival first) and Z (other-stream arrival first) share
// lambda / (lambda - s); B and V (arrival beats service) share
// lambda (1 - P_{lambda-s}) / ((lambda - s)(1 - P_lambda)). Both need s < lambda.
double clock_mgf_a(const SystemConfig& cfg, double s);
double clock_mgf_b(const SystemConfig& cfg, double s);

// First or second moment of a distribution from its MGF, by central
// differences at h = 1e-4 with one Richardson step at h/2.
double moments_from_mgf(const std::function<double(double)>& mgf, int order);

double mean_system_time(const SystemConfig& cfg);
double mean_interdeparture(const SystemConfig& cfg, std::size_t i);
double second_moment_interdeparture(const SystemConfig& cfg, std::size_t i);

// All per-stream metrics and totals. Average and peak age are computed twice,
// directly and through the moment decomposition E[T] + E[Y^2]/(2E[Y]) and
// E[T] + E[Y]; disagreement beyond 1e-9 relative throws InvariantViolation.
AgeReport age_report(const SystemConfig& cfg);

}  // namespace aoi
