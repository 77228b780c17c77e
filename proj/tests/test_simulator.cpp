#include <algorithm>
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "aoi/errors.hpp"
#include "aoi/simulator.hpp"
#include "support.hpp"

using namespace aoi;
using aoi::testing::reference_config;

namespace {

double rel_err(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

class RecordingTrace : public TraceSink {
public:
    void record(const TraceEvent& e) override { events.push_back(e); }
    std::vector<TraceEvent> events;
};

SimParams reference_params(double horizon, std::size_t reps, std::uint64_t seed = 42) {
    SimParams p{reference_config()};
    p.stop = MaxTime{horizon};
    p.replications = reps;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("simulated ages match the closed forms (exponential service)") {
    const auto params = reference_params(1e6, 4);
    const auto result = run(params);
    const auto& cfg = params.cfg;
    for (std::size_t i = 0; i < cfg.streams(); ++i) {
        CAPTURE(i);
        CHECK(rel_err(result.streams[i].avg_age.mean, avg_age(cfg, i)) < 0.01);
        CHECK(rel_err(result.streams[i].avg_peak.mean, peak_age(cfg, i)) < 0.01);
        CHECK(rel_err(result.streams[i].mean_t.mean, 0.4) < 0.01);
    }
    CHECK(rel_err(result.streams[0].avg_age.mean, 10.0 / 3.0) < 0.01);
    CHECK(rel_err(result.streams[0].avg_peak.mean, 56.0 / 15.0) < 0.01);
    CHECK(rel_err(result.streams[0].delivery_rate.mean, 0.3) < 0.01);
}

TEST_CASE("simulated ages match the closed forms (deterministic service)") {
    SimParams p{SystemConfig(1.0, {0.5, 0.5}, ServiceDistribution::deterministic(1.0))};
    p.stop = MaxTime{1e6};
    p.replications = 4;
    p.seed = 8;
    const auto result = run(p);
    for (const auto& s : result.streams) CHECK(rel_err(s.avg_age.mean, 2.0 * std::numbers::e) < 0.01);
}

TEST_CASE("light traffic with deterministic service") {
    SimParams p{SystemConfig(0.01, {1.0}, ServiceDistribution::deterministic(1.0))};
    p.stop = MaxTime{1e7};
    p.seed = 5;
    const auto result = run(p);
    const double expected = 1.0 / (0.01 * std::exp(-0.01));
    CHECK(expected == doctest::Approx(101.005).epsilon(1e-5));
    CHECK(rel_err(result.streams[0].avg_age.mean, expected) < 0.02);
}

TEST_CASE("sample-path identities") {
    const auto params = reference_params(4e5, 4, 99);
    const auto result = run(params);
    const auto& cfg = params.cfg;
    for (std::size_t i = 0; i < cfg.streams(); ++i) {
        const auto& e = result.streams[i];
        CAPTURE(i);
        // Renewal identity and delivery rate.
        CHECK(std::abs(e.delivery_rate.mean * e.mean_y.mean - 1.0) < 0.01);
        CHECK(std::abs(e.delivery_rate.mean - cfg.stream_rate(i) * cfg.p_lambda()) <= 3.0 * e.delivery_rate.std_error);
        // Age and peak decompositions on the simulated moments.
        CHECK(rel_err(e.avg_age.mean, e.mean_t.mean + e.mean_y2.mean / (2.0 * e.mean_y.mean)) < 0.005);
        CHECK(rel_err(e.avg_peak.mean, e.mean_t.mean + e.mean_y.mean) < 0.005);
        // System time is the service conditioned on beating the next arrival.
        CHECK(std::abs(e.mean_t.mean - mean_system_time(cfg)) <= 3.0 * e.mean_t.std_error);
    }
    for (const auto& reps : result.replication_tallies) {
        for (const auto& t : reps) {
            CHECK(t.age_area >= 0.0);
            CHECK((t.deliveries == t.peaks_count || t.deliveries == t.peaks_count + 1));
        }
    }
}

TEST_CASE("identical seeds give identical results") {
    auto params = reference_params(2e4, 3, 17);
    params.mgf_probes = {-0.5};
    const auto a = run(params);
    params.threads = 1;
    const auto b = run(params);
    for (std::size_t i = 0; i < a.streams.size(); ++i) {
        CHECK(a.streams[i].avg_age.mean == b.streams[i].avg_age.mean);
        CHECK(a.streams[i].avg_age.std_error == b.streams[i].avg_age.std_error);
        CHECK(a.streams[i].avg_peak.mean == b.streams[i].avg_peak.mean);
        CHECK(a.streams[i].mgf[0].value.mean == b.streams[i].mgf[0].value.mean);
    }
    params.seed = 18;
    CHECK(run(params).streams[0].avg_age.mean != a.streams[0].avg_age.mean);
}

TEST_CASE("relabelling streams with their substreams permutes the results") {
    auto params = reference_params(2e4, 2, 3);
    const auto base = run(params);

    // New label j carries old stream perm[j].
    const std::vector<std::size_t> perm{2, 0, 1};
    const auto probs = params.cfg.probs();
    SimParams permuted{SystemConfig(params.cfg.total_rate(), {probs[2], probs[0], probs[1]}, params.cfg.service())};
    permuted.stop = params.stop;
    permuted.replications = params.replications;
    permuted.seed = params.seed;
    permuted.stream_keys = {2, 0, 1};
    const auto moved = run(permuted);
    for (std::size_t j = 0; j < perm.size(); ++j) {
        CHECK(moved.streams[j].avg_age.mean == base.streams[perm[j]].avg_age.mean);
        CHECK(moved.streams[j].avg_peak.mean == base.streams[perm[j]].avg_peak.mean);
        CHECK(moved.streams[j].mean_y2.mean == base.streams[perm[j]].mean_y2.mean);
    }
}

TEST_CASE("stopping on a delivery count") {
    SimParams p{reference_config()};
    p.stop = MinDeliveries{5000};
    p.warmup_fraction = 0.1;
    p.replications = 2;
    const auto result = run(p);
    for (const auto& reps : result.replication_tallies)
        for (const auto& t : reps) CHECK(t.deliveries >= 5000);
    CHECK(rel_err(result.streams[0].avg_age.mean, 10.0 / 3.0) < 0.05);
    for (double e : result.replication_elapsed) CHECK(e > 0.0);
}

TEST_CASE("event trace") {
    auto params = reference_params(10.0, 2, 1);
    params.warmup_fraction = 0.0;
    RecordingTrace trace;
    const auto result = run(params, &trace);
    REQUIRE(!trace.events.empty());
    for (std::size_t k = 1; k < trace.events.size(); ++k) CHECK(trace.events[k - 1].time <= trace.events[k].time);
    std::uint64_t deliveries = 0;
    for (std::size_t k = 0; k < trace.events.size(); ++k) {
        const auto& e = trace.events[k];
        CHECK(e.stream < 3);
        CHECK(e.generation_time <= e.time);
        if (e.kind == TraceKind::delivery) ++deliveries;
        if (e.kind == TraceKind::preemption) {
            REQUIRE(k + 1 < trace.events.size());
            CHECK(trace.events[k + 1].kind == TraceKind::arrival);
            CHECK(trace.events[k + 1].time == e.time);
        }
    }
    std::uint64_t counted = 0;
    for (const auto& t : result.replication_tallies[0]) counted += t.deliveries;
    CHECK(deliveries == counted);
}

TEST_CASE("empirical MGF probe") {
    auto params = reference_params(4e5, 1, 2024);
    params.mgf_probes = {-0.5, -1.0};
    const auto result = run(params);
    const auto& tally = result.pooled[0];
    REQUIRE(tally.gaps >= 100000);

    const auto zero = empirical_mgf_probe(tally, 0.0);
    CHECK(zero.mean == 1.0);
    CHECK(zero.std_error == 0.0);
    const auto half = empirical_mgf_probe(tally, -0.5);
    CHECK(std::abs(half.mean - 1.0 / 3.0) <= 4.0 * half.std_error);
    const auto one = empirical_mgf_probe(tally, -1.0);
    CHECK(std::abs(one.mean - 3.0 / 17.0) <= 4.0 * one.std_error);

    CHECK_THROWS_AS(empirical_mgf_probe(tally, 0.5), DomainError);
    CHECK_THROWS_AS(empirical_mgf_probe(tally, -0.25), DomainError);
    CHECK_THROWS_AS(empirical_mgf_probe(PerStreamTally{}, -0.5), InsufficientDataError);
}

TEST_CASE("conditional clock sampler") {
    const auto cfg = reference_config();
    RandomSource rng(31);
    const std::vector<double> probes = clock_probe_points(cfg);
    CHECK(probes[2] == doctest::Approx(0.375));

    const auto a = clock_conditional_sampler(cfg, 0, Clock::own_arrival, 1000, rng, probes);
    CHECK(a[0].value.mean == 1.0);

    const auto b = clock_conditional_sampler(cfg, 0, Clock::own_preemption, 1'000'000, rng, probes);
    CHECK(std::abs(b[2].value.mean - clock_mgf_b(cfg, 0.375)) <= 5.0 * b[2].value.std_error);

    const auto u = clock_conditional_sampler(cfg, 0, Clock::service, 1'000'000, rng, probes);
    CHECK(std::abs(u[1].value.mean - system_time_mgf(cfg, -0.5)) <= 5.0 * u[1].value.std_error);

    const SystemConfig single(1.5, {1.0}, ServiceDistribution::exponential(1.0));
    CHECK_THROWS_AS(clock_conditional_sampler(single, 0, Clock::other_arrival, 10, rng, probes),
                    ConditioningTooRareError);
}

TEST_CASE("parameter validation") {
    auto p = reference_params(0.0, 1);
    CHECK_THROWS_AS(run(p), DomainError);
    p = reference_params(10.0, 0);
    CHECK_THROWS_AS(run(p), DomainError);
    p = reference_params(10.0, 1);
    p.warmup_fraction = 1.0;
    CHECK_THROWS_AS(run(p), DomainError);
    p.warmup_fraction = 0.0;
    p.mgf_probes = {0.3};
    CHECK_THROWS_AS(run(p), DomainError);
    p.mgf_probes = {};
    p.stop = MinDeliveries{0};
    CHECK_THROWS_AS(run(p), DomainError);
}
