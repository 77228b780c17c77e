#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "aoi/analytic.hpp"

namespace aoi {

// The five clocks whose tick values add up to one interdeparture time of the
// tagged stream.
enum class Clock {
    own_arrival,       // A: tagged-stream arrival while idle
    own_preemption,    // B: tagged-stream arrival preempts a service
    service,           // U: service completes before any arrival
    other_preemption,  // V: other-stream arrival preempts a service
    other_arrival,     // Z: other-stream arrival while idle
};

inline constexpr std::array<Clock, 5> kAllClocks = {Clock::own_arrival, Clock::own_preemption, Clock::service,
                                                    Clock::other_preemption, Clock::other_arrival};

// Single-letter label used in reports: A, B, U, V, Z.
std::string_view clock_letter(Clock c);

// Branch probabilities of the interdeparture semi-Markov chain.
// a + z = 1 out of the idle states, b + u + v = 1 out of the busy states.
struct ClockProbabilities {
    double a = 0.0;
    double b = 0.0;
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;

    double of(Clock c) const;
};

// MGF values E[exp(s X)] of the five clocks at a fixed s.
struct EdgeWeights {
    std::array<double, 5> mgf{1.0, 1.0, 1.0, 1.0, 1.0};

    double of(Clock c) const { return mgf[static_cast<std::size_t>(c)]; }
};

// Stream i is the tagged stream; every other stream is lumped into one.
ClockProbabilities clock_probs(const SystemConfig& cfg, std::size_t i);

// Clock MGFs at s from the closed forms (the service clock uses the system
// time MGF).
EdgeWeights edge_weights(const SystemConfig& cfg, double s);

enum class Node : std::size_t {
    idle = 0,          // q0: source, right after a tagged delivery
    own_in_service,    // q1
    other_in_service,  // q1'
    idle_after_other,  // q0': idle, last delivery was not tagged
    delivered,         // sink: next tagged delivery
};

inline constexpr std::size_t kNodeCount = 5;
inline constexpr std::size_t kEdgeCount = 10;

struct EdgeTopology {
    Node from;
    Node to;
    Clock clock;
};

// Fixed edge set of the detour flow graph.
extern const std::array<EdgeTopology, kEdgeCount> kDetourEdges;

// Detour flow graph with one real label per edge of kDetourEdges.
class FlowGraph {
public:
    static FlowGraph from_labels(const std::array<double, kEdgeCount>& labels) { return FlowGraph(labels); }
    // Labels probability(clock) * mgf(clock).
    static FlowGraph detour(const ClockProbabilities& pr, const EdgeWeights& w);

    const std::array<double, kEdgeCount>& labels() const { return labels_; }
    double label(std::size_t edge) const { return labels_.at(edge); }

private:
    explicit FlowGraph(const std::array<double, kEdgeCount>& labels) : labels_(labels) {}

    std::array<double, kEdgeCount> labels_;
};

// Closed-form source-to-sink transfer function. PoleError near a zero
// denominator.
double transfer_function(const EdgeWeights& w, const ClockProbabilities& pr);

// Transfer function from the node equations H(source) = 1,
// H(w) = sum H(w') L(w', w), by Gaussian elimination with partial pivoting.
// SingularSystemError when a pivot vanishes.
double solve_transfer_by_elimination(const FlowGraph& g);

struct PathSum {
    double value = 0.0;
    // Upper bound on |sum over paths longer than max_edges|.
    double truncation_bound = 0.0;
};

// Sum of label products over all source-to-sink paths with at most max_edges
// edges, accumulated length by length, plus a geometric bound on the
// discarded tail. DivergenceError if the transient block does not contract.
PathSum path_enumeration_oracle(const ClockProbabilities& pr, const EdgeWeights& w, std::size_t max_edges);
PathSum path_enumeration_oracle(const FlowGraph& g, std::size_t max_edges);

struct PathLengthTally {
    std::size_t count = 0;   // number of distinct source-to-sink paths
    double label_sum = 0.0;  // sum of their label products
};

// Literal depth-first enumeration of every source-to-sink path, grouped by
// edge count (index = length). Exponential in max_edges; meant for short
// depths and for cross-checking the layered sum.
std::vector<PathLengthTally> enumerate_paths(const FlowGraph& g, std::size_t max_edges);

}  // namespace aoi
