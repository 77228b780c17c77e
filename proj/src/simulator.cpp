#include "aoi/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "aoi/errors.hpp"

namespace aoi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Substream tags mixed into the seed.
constexpr std::uint64_t kServiceStream = 0;
constexpr std::uint64_t kArrivalStream = 1;

struct Packet {
    std::size_t stream;
    double generation;
    double completion;
};

struct Replication {
    std::vector<PerStreamTally> tallies;
    double elapsed = 0.0;
};

// Integral of (t - u) over [t0, t1].
double sawtooth_area(double t0, double t1, double u) {
    const double width = t1 - t0;
    return width * ((t0 - u) + 0.5 * width);
}

class EventLoop {
public:
    EventLoop(const SimParams& params, std::size_t replication, TraceSink* trace)
        : params_(params),
          cfg_(params.cfg),
          trace_(trace),
          service_rng_(params.seed, {replication, kServiceStream}) {
        const std::size_t m = cfg_.streams();
        arrival_rngs_.reserve(m);
        rates_.reserve(m);
        for (std::size_t k = 0; k < m; ++k) {
            const std::uint64_t key = params.stream_keys.empty() ? k : params.stream_keys[k];
            arrival_rngs_.emplace_back(params.seed, std::initializer_list<std::uint64_t>{replication, kArrivalStream, key});
            rates_.push_back(cfg_.stream_rate(k));
        }
        tallies_.resize(m);
        for (auto& t : tallies_) {
            t.probe_s = params.mgf_probes;
            t.probe_sum.assign(params.mgf_probes.size(), 0.0);
            t.probe_sum2.assign(params.mgf_probes.size(), 0.0);
        }
        total_deliveries_.assign(m, 0);
    }

    Replication run() {
        const std::size_t m = cfg_.streams();
        std::vector<double> next_arrival(m);
        for (std::size_t k = 0; k < m; ++k) next_arrival[k] = arrival_rngs_[k].exponential(rates_[k]);

        double end_time = 0.0;
        if (const auto* stop = std::get_if<MaxTime>(&params_.stop)) {
            horizon_ = stop->horizon;
            warmup_end_ = params_.warmup_fraction * horizon_;
        } else {
            const auto n = std::get<MinDeliveries>(params_.stop).per_stream;
            target_ = n;
            warmup_deliveries_ = static_cast<std::uint64_t>(std::ceil(params_.warmup_fraction * static_cast<double>(n)));
            warmup_end_ = warmup_deliveries_ == 0 ? 0.0 : kInf;
        }

        std::optional<Packet> busy;
        for (;;) {
            const auto next = static_cast<std::size_t>(
                std::min_element(next_arrival.begin(), next_arrival.end()) - next_arrival.begin());
            const double arrival_time = next_arrival[next];

            // Ties resolve as completion first.
            if (busy && busy->completion <= arrival_time) {
                const double t = busy->completion;
                if (t > horizon_) {
                    end_time = horizon_;
                    break;
                }
                deliver(*busy, t);
                busy.reset();
                if (finished()) {
                    end_time = t;
                    break;
                }
                continue;
            }
            if (arrival_time > horizon_) {
                end_time = horizon_;
                break;
            }
            if (busy && trace_) trace_->record({arrival_time, TraceKind::preemption, busy->stream, busy->generation});
            if (trace_) trace_->record({arrival_time, TraceKind::arrival, next, arrival_time});
            busy = Packet{next, arrival_time, arrival_time + cfg_.service().sample(service_rng_)};
            next_arrival[next] = arrival_time + arrival_rngs_[next].exponential(rates_[next]);
        }

        for (auto& t : tallies_) {
            const double start = std::max(warmup_end_, t.last_delivery_time);
            if (end_time > start) t.age_area += sawtooth_area(start, end_time, t.last_generation_time);
        }
        return Replication{std::move(tallies_), end_time - warmup_end_};
    }

private:
    void deliver(const Packet& packet, double t) {
        auto& tally = tallies_[packet.stream];
        if (t > warmup_end_) {
            const double start = std::max(warmup_end_, tally.last_delivery_time);
            tally.age_area += sawtooth_area(start, t, tally.last_generation_time);
            tally.deliveries += 1;
            tally.t_sum += t - packet.generation;
            if (tally.has_delivery) {
                const double y = t - tally.last_delivery_time;
                tally.gaps += 1;
                tally.y_sum += y;
                tally.y2_sum += y * y;
                for (std::size_t p = 0; p < tally.probe_s.size(); ++p) {
                    const double e = std::exp(tally.probe_s[p] * y);
                    tally.probe_sum[p] += e;
                    tally.probe_sum2[p] += e * e;
                }
                tally.peaks_sum += t - tally.last_generation_time;
                tally.peaks_count += 1;
            }
        }
        tally.last_delivery_time = t;
        tally.last_generation_time = packet.generation;
        tally.has_delivery = true;
        total_deliveries_[packet.stream] += 1;
        if (trace_) trace_->record({t, TraceKind::delivery, packet.stream, packet.generation});

        if (target_ > 0 && warmup_end_ == kInf &&
            std::all_of(total_deliveries_.begin(), total_deliveries_.end(),
                        [this](std::uint64_t d) { return d >= warmup_deliveries_; })) {
            warmup_end_ = t;
        }
    }

    bool finished() const {
        if (target_ == 0) return false;
        return std::all_of(tallies_.begin(), tallies_.end(),
                           [this](const PerStreamTally& t) { return t.deliveries >= target_; });
    }

    const SimParams& params_;
    const SystemConfig& cfg_;
    TraceSink* trace_;
    RandomSource service_rng_;
    std::vector<RandomSource> arrival_rngs_;
    std::vector<double> rates_;
    std::vector<PerStreamTally> tallies_;
    std::vector<std::uint64_t> total_deliveries_;
    double horizon_ = kInf;
    double warmup_end_ = 0.0;
    std::uint64_t target_ = 0;
    std::uint64_t warmup_deliveries_ = 0;
};

double ratio(double num, double den) { return den > 0.0 ? num / den : kNaN; }

Estimate across(const std::vector<double>& values) {
    const auto n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return {mean, kNaN};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

void PerStreamTally::merge(const PerStreamTally& other) {
    deliveries += other.deliveries;
    age_area += other.age_area;
    peaks_sum += other.peaks_sum;
    peaks_count += other.peaks_count;
    gaps += other.gaps;
    y_sum += other.y_sum;
    y2_sum += other.y2_sum;
    t_sum += other.t_sum;
    if (probe_s.empty()) {
        probe_s = other.probe_s;
        probe_sum.assign(probe_s.size(), 0.0);
        probe_sum2.assign(probe_s.size(), 0.0);
    }
    for (std::size_t p = 0; p < probe_sum.size() && p < other.probe_sum.size(); ++p) {
        probe_sum[p] += other.probe_sum[p];
        probe_sum2[p] += other.probe_sum2[p];
    }
    has_delivery = has_delivery || other.has_delivery;
}

void validate(const SimParams& params) {
    if (const auto* stop = std::get_if<MaxTime>(&params.stop)) {
        if (!(std::isfinite(stop->horizon) && stop->horizon > 0.0))
            throw DomainError(fmt::format("max_time must be positive, got {}", stop->horizon));
    } else if (std::get<MinDeliveries>(params.stop).per_stream < 1) {
        throw DomainError("min_deliveries_per_stream must be at least 1");
    }
    if (!(params.warmup_fraction >= 0.0 && params.warmup_fraction < 1.0))
        throw DomainError(fmt::format("warmup_fraction must lie in [0, 1), got {}", params.warmup_fraction));
    if (params.replications < 1) throw DomainError("replications must be at least 1");
    for (double s : params.mgf_probes) {
        if (!(s <= 0.0)) throw DomainError(fmt::format("MGF probe s = {} must be <= 0", s));
    }
    if (!params.stream_keys.empty() && params.stream_keys.size() != params.cfg.streams())
        throw DomainError("stream_keys must have one entry per stream");
}

SimResult run(const SimParams& params, TraceSink* trace) {
    validate(params);
    const std::size_t reps = params.replications;
    std::vector<Replication> outputs(reps);
    std::vector<std::exception_ptr> errors(reps);

    auto work = [&](std::size_t r) {
        try {
            EventLoop loop(params, r, r == 0 ? trace : nullptr);
            outputs[r] = loop.run();
        } catch (...) {
            errors[r] = std::current_exception();
        }
    };
    std::size_t workers = params.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : params.threads;
    workers = std::min(workers, reps);
    if (workers <= 1) {
        for (std::size_t r = 0; r < reps; ++r) work(r);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t r = w; r < reps; r += workers) work(r);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (std::size_t r = 0; r < reps; ++r) {
        if (!errors[r]) continue;
        try {
            std::rethrow_exception(errors[r]);
        } catch (const std::exception& e) {
            throw ReplicationError(fmt::format("replication {} failed: {}", r, e.what()));
        }
    }

    const std::size_t m = params.cfg.streams();
    SimResult result;
    result.streams.resize(m);
    result.pooled.resize(m);
    for (const auto& out : outputs) {
        result.replication_tallies.push_back(out.tallies);
        result.replication_elapsed.push_back(out.elapsed);
    }
    for (std::size_t k = 0; k < m; ++k) {
        std::vector<double> age, peak, y, y2, t, rate;
        for (const auto& out : outputs) {
            const auto& tally = out.tallies[k];
            result.pooled[k].merge(tally);
            age.push_back(ratio(tally.age_area, out.elapsed));
            peak.push_back(ratio(tally.peaks_sum, static_cast<double>(tally.peaks_count)));
            y.push_back(ratio(tally.y_sum, static_cast<double>(tally.gaps)));
            y2.push_back(ratio(tally.y2_sum, static_cast<double>(tally.gaps)));
            t.push_back(ratio(tally.t_sum, static_cast<double>(tally.deliveries)));
            rate.push_back(ratio(static_cast<double>(tally.deliveries), out.elapsed));
        }
        auto& est = result.streams[k];
        est.avg_age = across(age);
        est.avg_peak = across(peak);
        est.mean_y = across(y);
        est.mean_y2 = across(y2);
        est.mean_t = across(t);
        est.delivery_rate = across(rate);
        for (double s : params.mgf_probes) {
            MgfProbe probe{s, {kNaN, kNaN}};
            try {
                probe.value = empirical_mgf_probe(result.pooled[k], s);
            } catch (const InsufficientDataError&) {
            }
            est.mgf.push_back(probe);
        }
    }
    return result;
}

Estimate empirical_mgf_probe(const PerStreamTally& tally, double s) {
    if (!(s <= 0.0)) throw DomainError(fmt::format("empirical MGF probe needs s <= 0, got {}", s));
    if (s == 0.0) return {1.0, 0.0};
    if (tally.gaps < 2) throw InsufficientDataError(fmt::format("only {} interdeparture gaps recorded", tally.gaps));
    for (std::size_t p = 0; p < tally.probe_s.size(); ++p) {
        if (tally.probe_s[p] != s) continue;
        const auto n = static_cast<double>(tally.gaps);
        const double mean = tally.probe_sum[p] / n;
        const double var = std::max(0.0, (tally.probe_sum2[p] - n * mean * mean) / (n - 1.0));
        return {mean, std::sqrt(var / n)};
    }
    throw DomainError(fmt::format("s = {} was not configured as an MGF probe", s));
}

std::vector<double> clock_probe_points(const SystemConfig& cfg) { return {0.0, -0.5, 0.25 * cfg.total_rate()}; }

std::vector<MgfProbe> clock_conditional_sampler(const SystemConfig& cfg, std::size_t i, Clock which,
                                                std::size_t n, RandomSource& rng, std::span<const double> probes) {
    if (n < 1) throw DomainError("clock sampler needs n >= 1");
    const double own_rate = cfg.stream_rate(i);
    double other_prob = 0.0;
    for (std::size_t j = 0; j < cfg.streams(); ++j)
        if (j != i) other_prob += cfg.prob(j);
    const double other_rate = cfg.total_rate() * other_prob;

    std::vector<double> sum(probes.size(), 0.0), sum2(probes.size(), 0.0);
    std::size_t kept = 0;
    std::uint64_t attempts = 0;
    while (kept < n) {
        const double x = rng.exponential(own_rate);
        const double other = rng.exponential(other_rate);
        const double service = cfg.service().sample(rng);
        ++attempts;
        std::optional<double> value;
        switch (which) {
            case Clock::own_arrival:
                if (x < other) value = x;
                break;
            case Clock::other_arrival:
                if (other < x) value = other;
                break;
            case Clock::own_preemption:
                if (x < std::min(service, other)) value = x;
                break;
            case Clock::other_preemption:
                if (other < std::min(service, x)) value = other;
                break;
            case Clock::service:
                if (service < std::min(x, other)) value = service;
                break;
        }
        if (value) {
            ++kept;
            for (std::size_t p = 0; p < probes.size(); ++p) {
                const double e = std::exp(probes[p] * *value);
                sum[p] += e;
                sum2[p] += e * e;
            }
        }
        if (attempts % 10000 == 0 && static_cast<double>(kept) < 1e-4 * static_cast<double>(attempts)) {
            throw ConditioningTooRareError(fmt::format("clock {} accepted {} of {} draws", clock_letter(which), kept,
                                                       attempts));
        }
    }
    std::vector<MgfProbe> out;
    const auto count = static_cast<double>(kept);
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const double mean = sum[p] / count;
        double se = 0.0;
        if (kept > 1) se = std::sqrt(std::max(0.0, (sum2[p] - count * mean * mean) / (count - 1.0)) / count);
        out.push_back({probes[p], {mean, se}});
    }
    return out;
}

}  // namespace aoi
