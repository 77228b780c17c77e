#pragma once

#include <string>
#include <variant>

#include "aoi/random.hpp"

namespace aoi {

struct Exponential {
    double rate;  // mu; E[S] = 1/mu
};

struct Gamma {
    double shape;  // k
    double scale;  // theta; E[S] = k*theta
};

struct Deterministic {
    double value;
};

struct Uniform {
    double lower;
    double upper;
};

// Service-time law S. A closed set of variants so that the Laplace
// transform and E[S exp(-lambda S)] are always available in closed form.
class ServiceDistribution {
public:
    using Variant = std::variant<Exponential, Gamma, Deterministic, Uniform>;

    // Throws DomainError when a parameter violates its bound.
    static ServiceDistribution exponential(double rate);
    static ServiceDistribution gamma(double shape, double scale);
    static ServiceDistribution deterministic(double value);
    static ServiceDistribution uniform(double lower, double upper);

    const Variant& law() const { return law_; }

    // "exponential", "gamma", "deterministic" or "uniform".
    std::string kind() const;

    double mean() const;
    double variance() const;

    // Infimum of the Laplace convergence region: laplace(s) is finite for
    // s > abscissa() (-inf for bounded support).
    double abscissa() const;
    bool converges_at(double s) const;

    // E[exp(-s S)]. Throws DomainError outside the convergence region.
    double laplace(double s) const;

    // E[S exp(-lambda S)] = -d/ds laplace(s) at s = lambda.
    double exp_weighted_mean(double lambda) const;

    // Strictly positive draw.
    double sample(RandomSource& rng) const;

private:
    explicit ServiceDistribution(Variant law) : law_(law) {}

    void require_converges(double s) const;

    Variant law_;
};

}  // namespace aoi
