#include "aoi/flowgraph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "aoi/errors.hpp"

namespace aoi {

namespace {

constexpr double kPoleTolerance = 1e-12;
constexpr std::size_t kMaxContractionPower = 64;

constexpr std::size_t index(Node n) { return static_cast<std::size_t>(n); }

using Matrix4 = std::array<std::array<double, 4>, 4>;

double max_row_sum(const Matrix4& m) {
    double best = 0.0;
    for (const auto& row : m) {
        double sum = 0.0;
        for (double x : row) sum += std::abs(x);
        best = std::max(best, sum);
    }
    return best;
}

Matrix4 multiply(const Matrix4& x, const Matrix4& y) {
    Matrix4 r{};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t j = 0; j < 4; ++j) r[i][j] += x[i][k] * y[k][j];
    return r;
}

}  // namespace

const std::array<EdgeTopology, kEdgeCount> kDetourEdges = {{
    {Node::idle, Node::own_in_service, Clock::own_arrival},
    {Node::idle, Node::other_in_service, Clock::other_arrival},
    {Node::own_in_service, Node::own_in_service, Clock::own_preemption},
    {Node::own_in_service, Node::delivered, Clock::service},
    {Node::own_in_service, Node::other_in_service, Clock::other_preemption},
    {Node::other_in_service, Node::idle_after_other, Clock::service},
    {Node::other_in_service, Node::other_in_service, Clock::other_preemption},
    {Node::other_in_service, Node::own_in_service, Clock::own_preemption},
    {Node::idle_after_other, Node::other_in_service, Clock::other_arrival},
    {Node::idle_after_other, Node::own_in_service, Clock::own_arrival},
}};

std::string_view clock_letter(Clock c) {
    switch (c) {
        case Clock::own_arrival: return "A";
        case Clock::own_preemption: return "B";
        case Clock::service: return "U";
        case Clock::other_preemption: return "V";
        case Clock::other_arrival: return "Z";
    }
    return "?";
}

double ClockProbabilities::of(Clock c) const {
    switch (c) {
        case Clock::own_arrival: return a;
        case Clock::own_preemption: return b;
        case Clock::service: return u;
        case Clock::other_preemption: return v;
        case Clock::other_arrival: return z;
    }
    return 0.0;
}

ClockProbabilities clock_probs(const SystemConfig& cfg, std::size_t i) {
    const double lambda = cfg.total_rate();
    const double own = cfg.stream_rate(i) / lambda;
    // Summing the other probabilities avoids 1 - own rounding for M = 1.
    double other = 0.0;
    for (std::size_t j = 0; j < cfg.streams(); ++j)
        if (j != i) other += cfg.prob(j);
    const double p = cfg.p_lambda();
    ClockProbabilities pr;
    pr.a = own;
    pr.b = own * (1.0 - p);
    pr.u = p;
    pr.v = other * (1.0 - p);
    pr.z = other;
    return pr;
}

EdgeWeights edge_weights(const SystemConfig& cfg, double s) {
    EdgeWeights w;
    const double arrival = clock_mgf_a(cfg, s);
    const double preemption = clock_mgf_b(cfg, s);
    w.mgf[static_cast<std::size_t>(Clock::own_arrival)] = arrival;
    w.mgf[static_cast<std::size_t>(Clock::other_arrival)] = arrival;
    w.mgf[static_cast<std::size_t>(Clock::own_preemption)] = preemption;
    w.mgf[static_cast<std::size_t>(Clock::other_preemption)] = preemption;
    w.mgf[static_cast<std::size_t>(Clock::service)] = system_time_mgf(cfg, s);
    return w;
}

FlowGraph FlowGraph::detour(const ClockProbabilities& pr, const EdgeWeights& w) {
    std::array<double, kEdgeCount> labels{};
    for (std::size_t e = 0; e < kEdgeCount; ++e) {
        Clock c = kDetourEdges[e].clock;
        labels[e] = pr.of(c) * w.of(c);
    }
    return FlowGraph(labels);
}

double transfer_function(const EdgeWeights& w, const ClockProbabilities& pr) {
    const double ad1 = pr.a * w.of(Clock::own_arrival);
    const double bd2 = pr.b * w.of(Clock::own_preemption);
    const double ud3 = pr.u * w.of(Clock::service);
    const double vd4 = pr.v * w.of(Clock::other_preemption);
    const double zd5 = pr.z * w.of(Clock::other_arrival);
    const double den = (1.0 - bd2) * (1.0 - ud3 * zd5) - vd4 * (1.0 + ud3 * ad1);
    if (std::abs(den) < kPoleTolerance) {
        throw PoleError(fmt::format("transfer function denominator {} is at a pole", den));
    }
    return ud3 * (bd2 * zd5 + ad1 - ad1 * vd4) / den;
}

double solve_transfer_by_elimination(const FlowGraph& g) {
    // Unknowns: H at every node except the source, row/column = node - 1.
    Matrix4 m{};
    std::array<double, 4> rhs{};
    for (std::size_t k = 0; k < 4; ++k) m[k][k] = 1.0;
    for (std::size_t e = 0; e < kEdgeCount; ++e) {
        const auto& edge = kDetourEdges[e];
        const std::size_t to = index(edge.to) - 1;
        if (edge.from == Node::idle) {
            rhs[to] += g.label(e);
        } else {
            m[to][index(edge.from) - 1] -= g.label(e);
        }
    }

    double scale = 1.0;
    for (const auto& row : m)
        for (double x : row) scale = std::max(scale, std::abs(x));

    for (std::size_t col = 0; col < 4; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        if (std::abs(m[pivot][col]) < kPoleTolerance * scale) {
            throw SingularSystemError(fmt::format("flow-graph node equations are singular (pivot {} in column {})",
                                                  m[pivot][col], col));
        }
        std::swap(m[pivot], m[col]);
        std::swap(rhs[pivot], rhs[col]);
        for (std::size_t r = col + 1; r < 4; ++r) {
            const double f = m[r][col] / m[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::array<double, 4> x{};
    for (std::size_t r = 4; r-- > 0;) {
        double acc = rhs[r];
        for (std::size_t c = r + 1; c < 4; ++c) acc -= m[r][c] * x[c];
        x[r] = acc / m[r][r];
    }
    return x[index(Node::delivered) - 1];
}

PathSum path_enumeration_oracle(const ClockProbabilities& pr, const EdgeWeights& w, std::size_t max_edges) {
    return path_enumeration_oracle(FlowGraph::detour(pr, w), max_edges);
}

PathSum path_enumeration_oracle(const FlowGraph& g, std::size_t max_edges) {
    if (max_edges < 2) throw DomainError("path enumeration needs max_edges >= 2");

    // Transient block (everything but the sink) in absolute value, and the
    // absolute sink column, for the tail bound.
    Matrix4 transient{};
    double sink_max = 0.0;
    for (std::size_t e = 0; e < kEdgeCount; ++e) {
        const auto& edge = kDetourEdges[e];
        if (edge.to == Node::delivered) {
            sink_max = std::max(sink_max, std::abs(g.label(e)));
        } else {
            transient[index(edge.from)][index(edge.to)] += std::abs(g.label(e));
        }
    }

    // Smallest power m with ||B^m|| < 1; then sum_j ||B^j|| <= sum_{j<m} ||B^j|| / (1 - ||B^m||).
    Matrix4 power{};
    for (std::size_t k = 0; k < 4; ++k) power[k][k] = 1.0;
    double head = 0.0;
    double contraction = 1.0;
    bool contracts = false;
    for (std::size_t m = 1; m <= kMaxContractionPower; ++m) {
        head += max_row_sum(power);
        power = multiply(power, transient);
        contraction = max_row_sum(power);
        if (contraction < 1.0) {
            contracts = true;
            break;
        }
    }
    if (!contracts) {
        throw DivergenceError(
            fmt::format("path sum does not contract: ||B^m|| >= 1 for every m <= {}", kMaxContractionPower));
    }

    // walk[n]: signed sum over length-k paths from the source ending at n;
    // mass[n]: the same with absolute labels.
    std::array<double, kNodeCount> walk{}, mass{};
    walk[index(Node::idle)] = 1.0;
    mass[index(Node::idle)] = 1.0;
    PathSum result;
    for (std::size_t k = 1; k <= max_edges; ++k) {
        std::array<double, kNodeCount> next_walk{}, next_mass{};
        for (std::size_t e = 0; e < kEdgeCount; ++e) {
            const auto& edge = kDetourEdges[e];
            next_walk[index(edge.to)] += walk[index(edge.from)] * g.label(e);
            next_mass[index(edge.to)] += mass[index(edge.from)] * std::abs(g.label(e));
        }
        result.value += next_walk[index(Node::delivered)];
        next_walk[index(Node::delivered)] = 0.0;
        next_mass[index(Node::delivered)] = 0.0;
        walk = next_walk;
        mass = next_mass;
    }
    double remaining = 0.0;
    for (double x : mass) remaining += x;
    result.truncation_bound = remaining * sink_max * head / (1.0 - contraction);
    return result;
}

std::vector<PathLengthTally> enumerate_paths(const FlowGraph& g, std::size_t max_edges) {
    std::vector<PathLengthTally> tally(max_edges + 1);
    std::array<std::vector<std::size_t>, kNodeCount> out;
    for (std::size_t e = 0; e < kEdgeCount; ++e) out[index(kDetourEdges[e].from)].push_back(e);

    auto visit = [&](auto&& self, Node at, std::size_t depth, double product) -> void {
        if (at == Node::delivered) {
            tally[depth].count += 1;
            tally[depth].label_sum += product;
            return;
        }
        if (depth == max_edges) return;
        for (std::size_t e : out[index(at)]) self(self, kDetourEdges[e].to, depth + 1, product * g.label(e));
    };
    visit(visit, Node::idle, 0, 1.0);
    return tally;
}

}  // namespace aoi
