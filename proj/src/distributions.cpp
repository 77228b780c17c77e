#include "aoi/distributions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <fmt/format.h>

#include "aoi/errors.hpp"

namespace aoi {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// h(x) = (1 - e^{-x}) / x, with h(0) = 1.
double one_minus_exp_over(double x) {
    if (std::abs(x) < 1e-12) return 1.0 - x / 2.0 + x * x / 6.0;
    return -std::expm1(-x) / x;
}

// h'(x). The closed form cancels badly near 0, so use the Taylor series
// sum_{n>=1} (-1)^n n x^{n-1} / (n+1)! there.
double one_minus_exp_over_derivative(double x) {
    if (std::abs(x) < 0.5) {
        double sum = 0.0;
        double power = 1.0;       // x^{n-1}
        double factorial = 2.0;   // (n+1)!
        for (int n = 1; n <= 30; ++n) {
            double term = (n % 2 == 0 ? 1.0 : -1.0) * n * power / factorial;
            sum += term;
            power *= x;
            factorial *= (n + 2);
        }
        return sum;
    }
    return (std::exp(-x) * (1.0 + x) - 1.0) / (x * x);
}

void require(bool ok, const char* what, double value) {
    if (!ok) throw DomainError(fmt::format("invalid service parameter {} = {}", what, value));
}

}  // namespace

ServiceDistribution ServiceDistribution::exponential(double rate) {
    require(std::isfinite(rate) && rate > 0.0, "rate", rate);
    return ServiceDistribution(Exponential{rate});
}

ServiceDistribution ServiceDistribution::gamma(double shape, double scale) {
    require(std::isfinite(shape) && shape > 0.0, "shape", shape);
    require(std::isfinite(scale) && scale > 0.0, "scale", scale);
    return ServiceDistribution(Gamma{shape, scale});
}

ServiceDistribution ServiceDistribution::deterministic(double value) {
    require(std::isfinite(value) && value > 0.0, "value", value);
    return ServiceDistribution(Deterministic{value});
}

ServiceDistribution ServiceDistribution::uniform(double lower, double upper) {
    require(std::isfinite(lower) && lower >= 0.0, "lower", lower);
    require(std::isfinite(upper) && upper > lower, "upper", upper);
    return ServiceDistribution(Uniform{lower, upper});
}

std::string ServiceDistribution::kind() const {
    return std::visit(overloaded{
                          [](const Exponential&) { return std::string("exponential"); },
                          [](const Gamma&) { return std::string("gamma"); },
                          [](const Deterministic&) { return std::string("deterministic"); },
                          [](const Uniform&) { return std::string("uniform"); },
                      },
                      law_);
}

double ServiceDistribution::mean() const {
    return std::visit(overloaded{
                          [](const Exponential& d) { return 1.0 / d.rate; },
                          [](const Gamma& d) { return d.shape * d.scale; },
                          [](const Deterministic& d) { return d.value; },
                          [](const Uniform& d) { return 0.5 * (d.lower + d.upper); },
                      },
                      law_);
}

double ServiceDistribution::variance() const {
    return std::visit(overloaded{
                          [](const Exponential& d) { return 1.0 / (d.rate * d.rate); },
                          [](const Gamma& d) { return d.shape * d.scale * d.scale; },
                          [](const Deterministic&) { return 0.0; },
                          [](const Uniform& d) {
                              double w = d.upper - d.lower;
                              return w * w / 12.0;
                          },
                      },
                      law_);
}

double ServiceDistribution::abscissa() const {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    return std::visit(overloaded{
                          [](const Exponential& d) { return -d.rate; },
                          [](const Gamma& d) { return -1.0 / d.scale; },
                          [](const Deterministic&) { return kNegInf; },
                          [](const Uniform&) { return kNegInf; },
                      },
                      law_);
}

bool ServiceDistribution::converges_at(double s) const {
    return std::isfinite(s) && s > abscissa();
}

void ServiceDistribution::require_converges(double s) const {
    if (!converges_at(s)) {
        throw DomainError(fmt::format("Laplace argument {} outside the convergence region (s > {}) of the {} law",
                                      s, abscissa(), kind()));
    }
}

double ServiceDistribution::laplace(double s) const {
    require_converges(s);
    if (s == 0.0) return 1.0;
    return std::visit(overloaded{
                          [s](const Exponential& d) { return d.rate / (d.rate + s); },
                          [s](const Gamma& d) { return std::pow(1.0 + s * d.scale, -d.shape); },
                          [s](const Deterministic& d) { return std::exp(-s * d.value); },
                          [s](const Uniform& d) {
                              if (std::abs(s) < 1e-12) {
                                  double a = d.lower, b = d.upper;
                                  return 1.0 - s * (a + b) / 2.0 + s * s * (a * a + a * b + b * b) / 6.0;
                              }
                              return std::exp(-s * d.lower) * one_minus_exp_over(s * (d.upper - d.lower));
                          },
                      },
                      law_);
}

double ServiceDistribution::exp_weighted_mean(double lambda) const {
    require_converges(lambda);
    return std::visit(overloaded{
                          [lambda](const Exponential& d) {
                              double r = d.rate + lambda;
                              return d.rate / (r * r);
                          },
                          [lambda](const Gamma& d) {
                              return d.shape * d.scale * std::pow(1.0 + lambda * d.scale, -(d.shape + 1.0));
                          },
                          [lambda](const Deterministic& d) { return d.value * std::exp(-lambda * d.value); },
                          [lambda](const Uniform& d) {
                              double w = d.upper - d.lower;
                              double x = lambda * w;
                              return std::exp(-lambda * d.lower) *
                                     (d.lower * one_minus_exp_over(x) - w * one_minus_exp_over_derivative(x));
                          },
                      },
                      law_);
}

double ServiceDistribution::sample(RandomSource& rng) const {
    return std::visit(overloaded{
                          [&rng](const Exponential& d) {
                              double x;
                              do x = rng.exponential(d.rate);
                              while (!(x > 0.0));
                              return x;
                          },
                          [&rng](const Gamma& d) {
                              std::gamma_distribution<double> g(d.shape, d.scale);
                              double x;
                              do x = g(rng.engine());
                              while (!(x > 0.0));
                              return x;
                          },
                          [](const Deterministic& d) { return d.value; },
                          [&rng](const Uniform& d) {
                              double x;
                              do x = d.lower + (d.upper - d.lower) * rng.uniform();
                              while (!(x > 0.0));
                              return x;
                          },
                      },
                      law_);
}

}  // namespace aoi
