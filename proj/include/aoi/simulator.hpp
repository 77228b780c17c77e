#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "aoi/analytic.hpp"
#include "aoi/flowgraph.hpp"
#include "aoi/random.hpp"

namespace aoi {

struct MaxTime {
    double horizon;
};

struct MinDeliveries {
    std::uint64_t per_stream;
};

using StopRule = std::variant<MaxTime, MinDeliveries>;

struct SimParams {
    SystemConfig cfg;
    StopRule stop = MaxTime{1e6};
    std::uint64_t seed = 1;
    // Fraction of the run discarded before statistics are collected. With
    // MaxTime the warm-up ends at warmup_fraction * horizon; with
    // MinDeliveries it ends once every stream has ceil(warmup_fraction * n)
    // deliveries.
    double warmup_fraction = 0.05;
    std::size_t replications = 1;
    // s <= 0 values at which E[exp(s Y)] is estimated per stream.
    std::vector<double> mgf_probes;
    // RNG substream key of each stream's arrival process; defaults to
    // 0..M-1. Relabelling streams together with their keys reproduces the
    // same sample path.
    std::vector<std::uint64_t> stream_keys;
    // Worker threads for replications; 0 picks the hardware concurrency.
    std::size_t threads = 0;
};

// Throws DomainError when params are inconsistent.
void validate(const SimParams& params);

struct PerStreamTally {
    std::uint64_t deliveries = 0;
    double age_area = 0.0;
    double peaks_sum = 0.0;
    std::uint64_t peaks_count = 0;
    std::uint64_t gaps = 0;
    double y_sum = 0.0;
    double y2_sum = 0.0;
    double t_sum = 0.0;
    std::vector<double> probe_s;
    std::vector<double> probe_sum;   // sum exp(s Y)
    std::vector<double> probe_sum2;  // sum exp(2 s Y)
    double last_delivery_time = 0.0;
    double last_generation_time = 0.0;
    bool has_delivery = false;

    void merge(const PerStreamTally& other);
};

struct Estimate {
    double mean = 0.0;
    // Standard error of the mean; NaN when it cannot be estimated.
    double std_error = 0.0;
};

struct MgfProbe {
    double s = 0.0;
    Estimate value;
};

struct StreamEstimates {
    Estimate avg_age;
    Estimate avg_peak;
    Estimate mean_y;
    Estimate mean_y2;
    Estimate mean_t;
    Estimate delivery_rate;
    std::vector<MgfProbe> mgf;
};

struct SimResult {
    std::vector<StreamEstimates> streams;
    // Replication-level tallies and observation windows.
    std::vector<std::vector<PerStreamTally>> replication_tallies;
    std::vector<double> replication_elapsed;
    // Tallies pooled over all replications.
    std::vector<PerStreamTally> pooled;
};

enum class TraceKind { arrival, delivery, preemption };

struct TraceEvent {
    double time;
    TraceKind kind;
    std::size_t stream;
    double generation_time;
};

// Receives every event of replication 0 in time order. Preemption events
// carry the evicted packet and precede the arrival that caused them.
class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void record(const TraceEvent& event) = 0;
};

// Discrete-event simulation of the multi-stream preemptive single-slot
// server with exact sawtooth-area age accounting.
SimResult run(const SimParams& params, TraceSink* trace = nullptr);

// Mean of exp(s Y) over the recorded gaps and its standard error. s = 0 gives
// exactly (1, 0); other values must be among the tally's configured probes.
Estimate empirical_mgf_probe(const PerStreamTally& tally, double s);

// Probe set used for the conditional clock checks: {0, -0.5, lambda / 4}.
std::vector<double> clock_probe_points(const SystemConfig& cfg);

// Draws independent (X, Lambda, S) triples, X ~ Exp(lambda_i), Lambda ~
// Exp(lambda - lambda_i), S ~ service, keeps the clock value whenever the
// conditioning event of `which` occurs, until n values are kept. Returns the
// empirical MGF of the kept values at each probe. Throws
// ConditioningTooRareError once the acceptance rate drops below 1e-4.
std::vector<MgfProbe> clock_conditional_sampler(const SystemConfig& cfg, std::size_t i, Clock which,
                                                std::size_t n, RandomSource& rng, std::span<const double> probes);

}  // namespace aoi
