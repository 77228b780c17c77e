#include "aoi/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string_view>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "aoi/analytic.hpp"
#include "aoi/config.hpp"
#include "aoi/errors.hpp"
#include "aoi/flowgraph.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/simulator.hpp"
#include "table.hpp"

namespace aoi::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Carries an exit code up to run().
struct Exit {
    int code;
    std::string message;
};

struct CommonOptions {
    std::string config_path;
    std::optional<std::string> output_path;
    std::optional<std::string> format;
};

std::optional<double> parse_real(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    if (text.empty()) return std::nullopt;
    auto whole = [](std::string_view s) -> std::optional<double> {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    };
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        auto num = whole(trim(text.substr(0, slash)));
        auto den = whole(trim(text.substr(slash + 1)));
        if (!num || !den || *den == 0.0) return std::nullopt;
        return *num / *den;
    }
    return whole(text);
}

RunConfig load_config(const CommonOptions& opts) {
    RunConfig cfg = [&] {
        try {
            return load_run_config(opts.config_path);
        } catch (const ConfigError& e) {
            throw Exit{kUsageError, e.what()};
        }
    }();
    if (const char* env = std::getenv("AOI_SEED"); env && *env) {
        std::uint64_t seed = 0;
        std::string_view text(env);
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
        if (ec != std::errc() || ptr != text.data() + text.size())
            throw Exit{kUsageError, fmt::format("AOI_SEED: '{}' is not an unsigned integer", text)};
        if (cfg.simulation) cfg.simulation->seed = seed;
    }
    if (opts.output_path) cfg.output.path = opts.output_path;
    if (opts.format) cfg.output.format = *opts.format == "json" ? OutputFormat::json : OutputFormat::csv;
    return cfg;
}

void write_table(const RunConfig& cfg, const Table& table, const std::string& command, std::ostream& out,
                 const nlohmann::json& extra = nlohmann::json::object()) {
    std::string content;
    if (cfg.output.format == OutputFormat::json) {
        auto doc = to_json(table, command);
        for (const auto& [k, v] : extra.items()) doc[k] = v;
        content = doc.dump(2) + "\n";
    } else {
        content = to_csv(table);
    }
    emit(cfg.output.path, content, out);
}

Cell number_or_empty(double x) { return std::isnan(x) ? Cell{} : Cell{x}; }

// ---------------------------------------------------------------- analyze

int cmd_analyze(const CommonOptions& opts, std::ostream& out) {
    const auto cfg = load_config(opts);
    const auto report = age_report(cfg.system);
    Table table{{"stream", "lambda_i", "p_i", "avg_age", "peak_age", "mean_T", "mean_Y", "mean_Y2", "delivery_rate"}};
    for (std::size_t i = 0; i < report.streams.size(); ++i) {
        const auto& m = report.streams[i];
        table.add({static_cast<std::int64_t>(i + 1), m.stream_rate, m.prob, m.avg_age, m.peak_age, m.mean_system_time,
                   m.mean_interdeparture, m.second_moment_interdeparture, m.delivery_rate});
    }
    table.add({std::string("total"), cfg.system.total_rate(), 1.0, report.total_age, report.total_peak_age,
               Cell{}, Cell{}, Cell{}, Cell{}});
    nlohmann::json extra = {{"system",
                             {{"total_rate", cfg.system.total_rate()},
                              {"stream_probs", std::vector<double>(cfg.system.probs().begin(), cfg.system.probs().end())},
                              {"service", service_to_json(cfg.system.service())}}}};
    write_table(cfg, table, "analyze", out, extra);
    return kOk;
}

// --------------------------------------------------------------- simulate

class BufferedTrace : public TraceSink {
public:
    void record(const TraceEvent& e) override {
        static constexpr std::string_view kKinds[] = {"arrival", "delivery", "preemption"};
        text_ += fmt::format("{},{},{},{}\n", e.time, kKinds[static_cast<int>(e.kind)], e.stream + 1, e.generation_time);
    }
    const std::string& text() const { return text_; }

private:
    std::string text_ = "time,kind,stream,generation_time\n";
};

std::string probe_label(double s) { return fmt::format("mgf_Y[s={}]", s); }

int cmd_simulate(const CommonOptions& opts, const std::optional<std::string>& trace_flag, std::ostream& out) {
    auto cfg = load_config(opts);
    if (trace_flag) cfg.output.trace_path = trace_flag;
    if (!cfg.simulation) throw Exit{kUsageError, fmt::format("{}: a simulation section is required", opts.config_path)};
    const auto params = cfg.sim_params();
    const auto report = age_report(cfg.system);

    BufferedTrace trace;
    const auto result = run(params, cfg.output.trace_path ? &trace : nullptr);

    Table table{{"stream", "lambda_i", "p_i", "avg_age", "avg_age_se", "peak_age", "peak_age_se", "mean_T",
                 "mean_T_se", "mean_Y", "mean_Y_se", "mean_Y2", "mean_Y2_se", "delivery_rate", "delivery_rate_se",
                 "avg_age_analytic", "peak_age_analytic"}};
    for (double s : params.mgf_probes) {
        table.columns.push_back(probe_label(s));
        table.columns.push_back(probe_label(s) + "_se");
        table.columns.push_back(probe_label(s) + "_analytic");
    }
    double total_age = 0.0, total_peak = 0.0;
    for (std::size_t i = 0; i < result.streams.size(); ++i) {
        const auto& e = result.streams[i];
        std::vector<Cell> row{static_cast<std::int64_t>(i + 1),
                              cfg.system.stream_rate(i),
                              cfg.system.prob(i),
                              e.avg_age.mean,
                              number_or_empty(e.avg_age.std_error),
                              e.avg_peak.mean,
                              number_or_empty(e.avg_peak.std_error),
                              e.mean_t.mean,
                              number_or_empty(e.mean_t.std_error),
                              e.mean_y.mean,
                              number_or_empty(e.mean_y.std_error),
                              e.mean_y2.mean,
                              number_or_empty(e.mean_y2.std_error),
                              e.delivery_rate.mean,
                              number_or_empty(e.delivery_rate.std_error),
                              report.streams[i].avg_age,
                              report.streams[i].peak_age};
        for (const auto& probe : e.mgf) {
            row.push_back(number_or_empty(probe.value.mean));
            row.push_back(number_or_empty(probe.value.std_error));
            row.push_back(interdeparture_mgf(cfg.system, i, probe.s));
        }
        total_age += e.avg_age.mean;
        total_peak += e.avg_peak.mean;
        table.add(std::move(row));
    }
    std::vector<Cell> total_row{std::string("total"), cfg.system.total_rate(), 1.0, total_age, Cell{}, total_peak};
    total_row.resize(table.columns.size());
    total_row[15] = report.total_age;
    total_row[16] = report.total_peak_age;
    table.add(std::move(total_row));

    nlohmann::json extra = {{"seed", params.seed},
                            {"replications", params.replications},
                            {"warmup_fraction", params.warmup_fraction},
                            {"elapsed", result.replication_elapsed}};
    if (cfg.output.trace_path) write_atomic(*cfg.output.trace_path, trace.text());
    write_table(cfg, table, "simulate", out, extra);
    return kOk;
}

// --------------------------------------------------------------- validate

struct Check {
    std::string name;
    std::optional<std::size_t> stream;
    std::optional<double> s;
    double observed = kNaN;
    double expected = kNaN;
    double tolerance = kNaN;
    std::string status;  // PASS, FAIL or SKIP
    std::string note;
};

bool within(double observed, double expected, double tolerance) {
    return std::isfinite(observed) && std::abs(observed - expected) <= tolerance;
}

Check make_check(std::string name, std::optional<std::size_t> stream, std::optional<double> s, double observed,
                 double expected, double tolerance, std::string note = {}) {
    return {std::move(name), stream,   s, observed, expected, tolerance,
            within(observed, expected, tolerance) ? "PASS" : "FAIL", std::move(note)};
}

// Smallest doubling of max_edges that brings the tail bound below target.
PathSum bracket_path_sum(const ClockProbabilities& pr, const EdgeWeights& w, double target) {
    PathSum sum;
    for (std::size_t edges = 64; edges <= (1u << 16); edges *= 2) {
        sum = path_enumeration_oracle(pr, w, edges);
        if (sum.truncation_bound < target) break;
    }
    return sum;
}

std::map<std::string, std::function<double()>> expectation_keys(const SystemConfig& sys, const AgeReport& report) {
    std::map<std::string, std::function<double()>> keys;
    keys["mean_T"] = [&] { return mean_system_time(sys); };
    keys["avg_age_tot"] = [&] { return report.total_age; };
    keys["peak_age_tot"] = [&] { return report.total_peak_age; };
    for (std::size_t i = 0; i < report.streams.size(); ++i) {
        const auto& m = report.streams[i];
        keys[fmt::format("avg_age_{}", i + 1)] = [&m] { return m.avg_age; };
        keys[fmt::format("peak_age_{}", i + 1)] = [&m] { return m.peak_age; };
        keys[fmt::format("mean_Y_{}", i + 1)] = [&m] { return m.mean_interdeparture; };
        keys[fmt::format("mean_Y2_{}", i + 1)] = [&m] { return m.second_moment_interdeparture; };
        keys[fmt::format("delivery_rate_{}", i + 1)] = [&m] { return m.delivery_rate; };
    }
    return keys;
}

int cmd_validate(const CommonOptions& opts, const std::vector<std::string>& expectations, std::ostream& out) {
    const auto cfg = load_config(opts);
    const auto& sys = cfg.system;
    const auto report = age_report(sys);

    std::vector<std::pair<std::string, double>> expected_values;
    const auto keys = expectation_keys(sys, report);
    for (const auto& item : expectations) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Exit{kUsageError, fmt::format("--expect '{}': expected KEY=VALUE", item)};
        const auto key = item.substr(0, eq);
        const auto value = parse_real(std::string_view(item).substr(eq + 1));
        if (!keys.count(key)) throw Exit{kUsageError, fmt::format("--expect: unknown key '{}'", key)};
        if (!value) throw Exit{kUsageError, fmt::format("--expect {}: '{}' is not a number", key, item.substr(eq + 1))};
        expected_values.emplace_back(key, *value);
    }

    std::vector<double> probes = cfg.mgf_s_values;
    if (probes.empty()) probes = {0.0, -0.5, -1.0};

    std::vector<Check> checks;
    // Interdeparture MGF: closed form vs transfer function vs elimination vs path sums.
    for (std::size_t i = 0; i < sys.streams(); ++i) {
        const auto pr = clock_probs(sys, i);
        for (double s : probes) {
            const double closed = interdeparture_mgf(sys, i, s);
            const auto w = edge_weights(sys, s);
            const double tol = 1e-10 * std::abs(closed);
            checks.push_back(make_check("mgf_Y_transfer_function", i, s, transfer_function(w, pr), closed, tol));
            checks.push_back(make_check("mgf_Y_elimination", i, s,
                                        solve_transfer_by_elimination(FlowGraph::detour(pr, w)), closed, tol));
            const auto sum = bracket_path_sum(pr, w, 1e-8);
            auto c = make_check("mgf_Y_path_enumeration", i, s, sum.value, closed, tol + sum.truncation_bound,
                                fmt::format("truncation_bound={:.3e}", sum.truncation_bound));
            if (!(sum.truncation_bound < 1e-8)) c.status = "FAIL";
            checks.push_back(std::move(c));
        }
    }

    // Closed-form moments vs numeric differentiation of the MGFs.
    {
        const double closed = mean_system_time(sys);
        const double numeric = moments_from_mgf([&](double s) { return system_time_mgf(sys, s); }, 1);
        checks.push_back(make_check("moment_mean_T", std::nullopt, std::nullopt, numeric, closed, 1e-5 * closed));
    }
    for (std::size_t i = 0; i < sys.streams(); ++i) {
        auto mgf = [&](double s) { return interdeparture_mgf(sys, i, s); };
        const auto& m = report.streams[i];
        checks.push_back(make_check("moment_mean_Y", i, std::nullopt, moments_from_mgf(mgf, 1), m.mean_interdeparture,
                                    1e-5 * m.mean_interdeparture));
        checks.push_back(make_check("moment_second_Y", i, std::nullopt, moments_from_mgf(mgf, 2),
                                    m.second_moment_interdeparture, 1e-5 * m.second_moment_interdeparture));
        const double age_route = m.mean_system_time + m.second_moment_interdeparture / (2.0 * m.mean_interdeparture);
        checks.push_back(make_check("avg_age_moment_route", i, std::nullopt, age_route, m.avg_age, 1e-9 * m.avg_age));
        const double peak_route = m.mean_system_time + m.mean_interdeparture;
        checks.push_back(make_check("peak_age_moment_route", i, std::nullopt, peak_route, m.peak_age, 1e-9 * m.peak_age));
    }

    // Conditional clocks of the tagged stream (stream 1) by rejection sampling.
    const std::uint64_t seed = cfg.simulation ? cfg.simulation->seed : 1;
    {
        constexpr std::size_t kClockSamples = 200000;
        RandomSource rng(seed, {0xC10C});
        const auto clock_probes = clock_probe_points(sys);
        for (Clock c : kAllClocks) {
            const auto name = fmt::format("clock_mgf_{}", clock_letter(c));
            std::vector<MgfProbe> got;
            try {
                got = clock_conditional_sampler(sys, 0, c, kClockSamples, rng, clock_probes);
            } catch (const ConditioningTooRareError& e) {
                for (double s : clock_probes)
                    checks.push_back({name, 0, s, kNaN, kNaN, kNaN, "SKIP", e.what()});
                continue;
            }
            for (const auto& g : got) {
                double expected = 0.0;
                switch (c) {
                    case Clock::own_arrival:
                    case Clock::other_arrival: expected = clock_mgf_a(sys, g.s); break;
                    case Clock::own_preemption:
                    case Clock::other_preemption: expected = clock_mgf_b(sys, g.s); break;
                    case Clock::service: expected = system_time_mgf(sys, g.s); break;
                }
                checks.push_back(make_check(name, 0, g.s, g.value.mean, expected, 5.0 * g.value.std_error + 1e-12,
                                            fmt::format("n={} tolerance=5se", kClockSamples)));
            }
        }
    }

    // Simulation against the closed forms.
    if (cfg.simulation) {
        const auto params = cfg.sim_params();
        const auto sim = run(params);
        for (std::size_t i = 0; i < sys.streams(); ++i) {
            const auto& e = sim.streams[i];
            const auto& m = report.streams[i];
            auto band = [](const Estimate& est, double ref) {
                double tol = 0.01 * std::abs(ref);
                if (std::isfinite(est.std_error)) tol = std::max(tol, 4.0 * est.std_error);
                return tol;
            };
            checks.push_back(make_check("sim_avg_age", i, std::nullopt, e.avg_age.mean, m.avg_age,
                                        band(e.avg_age, m.avg_age), "max(1%, 4se)"));
            checks.push_back(make_check("sim_peak_age", i, std::nullopt, e.avg_peak.mean, m.peak_age,
                                        band(e.avg_peak, m.peak_age), "max(1%, 4se)"));
            checks.push_back(make_check("sim_delivery_rate", i, std::nullopt, e.delivery_rate.mean, m.delivery_rate,
                                        band(e.delivery_rate, m.delivery_rate), "max(1%, 4se)"));
            checks.push_back(make_check("sim_renewal_identity", i, std::nullopt, e.delivery_rate.mean * e.mean_y.mean,
                                        1.0, 0.01, "lambda_e * E[Y]"));
            for (const auto& probe : e.mgf) {
                const double ref = interdeparture_mgf(sys, i, probe.s);
                checks.push_back(make_check("sim_mgf_Y", i, probe.s, probe.value.mean, ref,
                                            4.0 * probe.value.std_error + 1e-12, "4se"));
            }
        }
    }

    for (const auto& [key, value] : expected_values) {
        const double actual = keys.at(key)();
        checks.push_back(make_check(fmt::format("expect:{}", key), std::nullopt, std::nullopt, actual, value,
                                    1e-6 * std::abs(value)));
    }

    Table table{{"check", "stream", "s", "observed", "expected", "abs_delta", "tolerance", "status", "note"}};
    bool all_pass = true;
    for (const auto& c : checks) {
        all_pass = all_pass && c.status != "FAIL";
        table.add({c.name, c.stream ? Cell{static_cast<std::int64_t>(*c.stream + 1)} : Cell{},
                   c.s ? Cell{*c.s} : Cell{}, number_or_empty(c.observed), number_or_empty(c.expected),
                   number_or_empty(std::abs(c.observed - c.expected)), number_or_empty(c.tolerance), c.status,
                   c.note.empty() ? Cell{} : Cell{c.note}});
    }
    write_table(cfg, table, "validate", out, {{"passed", all_pass}, {"checks", checks.size()}});
    return all_pass ? kOk : kCheckFailed;
}

// --------------------------------------------------------------- optimize

struct OptimizeOptions {
    double rate = 0.0;
    std::size_t streams = 0;
    std::string service;
    std::optional<double> mu, shape, scale, value, lower, upper;
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
    std::string format = "csv";
    std::optional<std::string> output;
};

ServiceDistribution service_from_flags(const OptimizeOptions& o) {
    auto need = [&](const std::optional<double>& v, const char* flag) {
        if (!v) throw Exit{kUsageError, fmt::format("--service {} requires {}", o.service, flag)};
        return *v;
    };
    try {
        if (o.service == "exponential") return ServiceDistribution::exponential(need(o.mu, "--mu"));
        if (o.service == "gamma") return ServiceDistribution::gamma(need(o.shape, "--shape"), need(o.scale, "--scale"));
        if (o.service == "deterministic") return ServiceDistribution::deterministic(need(o.value, "--value"));
        if (o.service == "uniform") return ServiceDistribution::uniform(need(o.lower, "--lower"), need(o.upper, "--upper"));
    } catch (const DomainError& e) {
        throw Exit{kUsageError, e.what()};
    }
    throw Exit{kUsageError, fmt::format("--service: unknown kind '{}'", o.service)};
}

int cmd_optimize(const OptimizeOptions& o, std::ostream& out) {
    if (!(std::isfinite(o.rate) && o.rate > 0.0)) throw Exit{kUsageError, fmt::format("--rate must be positive, got {}", o.rate)};
    if (o.streams < 1) throw Exit{kUsageError, "--streams must be at least 1"};
    const auto service = service_from_flags(o);
    const auto result = optimal_allocation(o.rate, o.streams, service, o.samples, o.seed);

    std::string content;
    if (o.format == "json") {
        nlohmann::json doc = {{"command", "optimize"},
                              {"total_rate", o.rate},
                              {"streams", o.streams},
                              {"service", service_to_json(service)},
                              {"p_star", result.p_star},
                              {"delta_tot_star", result.delta_tot_star},
                              {"delta_peak_tot_star", result.delta_peak_tot_star},
                              {"verification",
                               {{"n_random_points", result.verification.n_random_points},
                                {"max_violation", result.verification.max_violation}}}};
        if (std::isfinite(result.verification.min_margin_off_center))
            doc["verification"]["min_margin_off_center"] = result.verification.min_margin_off_center;
        content = doc.dump(2) + "\n";
    } else {
        Table table{{"quantity", "stream", "value"}};
        for (std::size_t i = 0; i < result.p_star.size(); ++i)
            table.add({std::string("p_star"), static_cast<std::int64_t>(i + 1), result.p_star[i]});
        table.add({std::string("delta_tot_star"), Cell{}, result.delta_tot_star});
        table.add({std::string("delta_peak_tot_star"), Cell{}, result.delta_peak_tot_star});
        table.add({std::string("n_random_points"), Cell{},
                   static_cast<std::int64_t>(result.verification.n_random_points)});
        table.add({std::string("max_violation"), Cell{}, result.verification.max_violation});
        content = to_csv(table);
    }
    emit(o.output, content, out);
    return kOk;
}

// ------------------------------------------------------------------ sweep

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::size_t start = 0;
    if (text.find_first_not_of(" \t") == std::string::npos) throw Exit{kUsageError, "--grid: empty grid"};
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto token = std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto value = parse_real(token);
        if (!value) throw Exit{kUsageError, fmt::format("--grid: malformed value '{}'", token)};
        grid.push_back(*value);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return grid;
}

std::optional<std::size_t> stream_param(std::string_view name) {
    if (name.size() < 2 || name[0] != 'p') return std::nullopt;
    name.remove_prefix(name[1] == '_' ? 2 : 1);
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), k);
    if (ec != std::errc() || ptr != name.data() + name.size() || k < 1) return std::nullopt;
    return k - 1;
}

ServiceDistribution with_service_param(const ServiceDistribution& base, std::string_view name, double v) {
    return std::visit(
        [&](const auto& d) -> ServiceDistribution {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Exponential>) {
                if (name == "rate") return ServiceDistribution::exponential(v);
            } else if constexpr (std::is_same_v<T, Gamma>) {
                if (name == "shape") return ServiceDistribution::gamma(v, d.scale);
                if (name == "scale") return ServiceDistribution::gamma(d.shape, v);
            } else if constexpr (std::is_same_v<T, Deterministic>) {
                if (name == "value") return ServiceDistribution::deterministic(v);
            } else {
                if (name == "lower") return ServiceDistribution::uniform(v, d.upper);
                if (name == "upper") return ServiceDistribution::uniform(d.lower, v);
            }
            throw Exit{kUsageError, fmt::format("--param: '{}' is not a parameter of the {} service", name, base.kind())};
        },
        base.law());
}

SystemConfig swept_config(const SystemConfig& base, const std::string& param, double v) {
    std::string_view name = param;
    if (name.starts_with("service.")) name.remove_prefix(8);
    try {
        if (name == "total_rate") {
            return SystemConfig(v, std::vector<double>(base.probs().begin(), base.probs().end()), base.service());
        }
        if (auto k = stream_param(name)) {
            const std::size_t m = base.streams();
            if (*k >= m) throw Exit{kUsageError, fmt::format("--param {}: only {} streams configured", param, m)};
            if (m < 2) throw Exit{kUsageError, "--param p_i needs at least two streams"};
            if (!(v > 0.0 && v < 1.0)) throw Exit{kUsageError, fmt::format("--grid: p = {} outside (0, 1)", v)};
            std::vector<double> probs(m, (1.0 - v) / static_cast<double>(m - 1));
            probs[*k] = v;
            double sum = 0.0;
            for (double x : probs) sum += x;
            for (auto& x : probs) x /= sum;
            return SystemConfig(base.total_rate(), std::move(probs), base.service());
        }
        return SystemConfig(base.total_rate(), std::vector<double>(base.probs().begin(), base.probs().end()),
                            with_service_param(base.service(), name, v));
    } catch (const DomainError& e) {
        throw Exit{kUsageError, fmt::format("--grid: value {} invalid for {}: {}", v, param, e.what())};
    }
}

int cmd_sweep(const CommonOptions& opts, const std::string& param, const std::string& grid_text, bool simulate,
              std::ostream& out) {
    const auto cfg = load_config(opts);
    const auto grid = parse_grid(grid_text);
    if (simulate && !cfg.simulation) throw Exit{kUsageError, "--simulate requires a simulation section"};

    std::vector<SystemConfig> points;
    points.reserve(grid.size());
    for (double v : grid) points.push_back(swept_config(cfg.system, param, v));

    Table table{{"param", "value", "stream", "source", "avg_age", "peak_age", "mean_T", "mean_Y", "delivery_rate"}};
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto& sys = points[g];
        const auto report = age_report(sys);
        for (std::size_t i = 0; i < report.streams.size(); ++i) {
            const auto& m = report.streams[i];
            table.add({param, grid[g], static_cast<std::int64_t>(i + 1), std::string("analytic"), m.avg_age,
                       m.peak_age, m.mean_system_time, m.mean_interdeparture, m.delivery_rate});
        }
        table.add({param, grid[g], std::string("total"), std::string("analytic"), report.total_age,
                   report.total_peak_age, Cell{}, Cell{}, Cell{}});
        if (!simulate) continue;
        RunConfig point_cfg = cfg;
        point_cfg.system = sys;
        const auto sim = run(point_cfg.sim_params());
        double total = 0.0, total_peak = 0.0;
        for (std::size_t i = 0; i < sim.streams.size(); ++i) {
            const auto& e = sim.streams[i];
            table.add({param, grid[g], static_cast<std::int64_t>(i + 1), std::string("simulated"), e.avg_age.mean,
                       e.avg_peak.mean, e.mean_t.mean, e.mean_y.mean, e.delivery_rate.mean});
            total += e.avg_age.mean;
            total_peak += e.avg_peak.mean;
        }
        table.add({param, grid[g], std::string("total"), std::string("simulated"), total, total_peak, Cell{}, Cell{},
                   Cell{}});
    }
    write_table(cfg, table, "sweep", out);
    return kOk;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("-c,--config", opts.config_path, "Run configuration (JSON)")->required();
    cmd->add_option("-o,--output", opts.output_path, "Write the report here instead of output.path / stdout");
    cmd->add_option("--format", opts.format, "Report format, overrides output.format")
        ->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Age-of-information metrics for the multi-stream M/G/1/1 preemptive queue", "aoi"};
    app.require_subcommand(1);

    CommonOptions analyze_opts, simulate_opts, validate_opts, sweep_opts;
    std::optional<std::string> trace_path;
    std::vector<std::string> expectations;
    OptimizeOptions optimize_opts;
    std::string sweep_param, sweep_grid;
    bool sweep_simulate = false;

    auto* analyze = app.add_subcommand("analyze", "Closed-form per-stream ages and moments");
    add_common(analyze, analyze_opts);

    auto* simulate = app.add_subcommand("simulate", "Discrete-event simulation estimates");
    add_common(simulate, simulate_opts);
    simulate->add_option("--trace", trace_path, "Write the event trace of replication 0 as CSV");

    auto* validate = app.add_subcommand("validate", "Cross-check closed forms against oracles and simulation");
    add_common(validate, validate_opts);
    validate->add_option("--expect", expectations, "KEY=VALUE expected analytic value (repeatable)");

    auto* optimize = app.add_subcommand("optimize", "Fair rate allocation and its verification");
    optimize->add_option("--rate", optimize_opts.rate, "Total generation rate")->required();
    optimize->add_option("--streams", optimize_opts.streams, "Number of streams")->required();
    optimize->add_option("--service", optimize_opts.service, "exponential | gamma | deterministic | uniform")
        ->required();
    optimize->add_option("--mu", optimize_opts.mu, "Exponential service rate");
    optimize->add_option("--shape", optimize_opts.shape, "Gamma shape");
    optimize->add_option("--scale", optimize_opts.scale, "Gamma scale");
    optimize->add_option("--value", optimize_opts.value, "Deterministic service time");
    optimize->add_option("--lower", optimize_opts.lower, "Uniform lower bound");
    optimize->add_option("--upper", optimize_opts.upper, "Uniform upper bound");
    optimize->add_option("--samples", optimize_opts.samples, "Random simplex points for verification");
    optimize->add_option("--seed", optimize_opts.seed, "Seed of the verification sample");
    optimize->add_option("--format", optimize_opts.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    optimize->add_option("-o,--output", optimize_opts.output, "Output path (default stdout)");

    auto* sweep = app.add_subcommand("sweep", "Long-format table over a parameter grid");
    add_common(sweep, sweep_opts);
    sweep->add_option("--param", sweep_param, "total_rate | p<i> | service parameter name")->required();
    sweep->add_option("--grid", sweep_grid, "Comma-separated values (fractions a/b allowed)")->required();
    sweep->add_flag("--simulate", sweep_simulate, "Add simulated rows using the simulation section");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(analyze_opts, out);
        if (simulate->parsed()) return cmd_simulate(simulate_opts, trace_path, out);
        if (validate->parsed()) return cmd_validate(validate_opts, expectations, out);
        if (optimize->parsed()) return cmd_optimize(optimize_opts, out);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_param, sweep_grid, sweep_simulate, out);
    } catch (const Exit& e) {
        err << "aoi: " << e.message << '\n';
        return e.code;
    } catch (const ConfigError& e) {
        err << "aoi: " << e.what() << '\n';
        return kUsageError;
    } catch (const ReplicationError& e) {
        err << "aoi: " << e.what() << '\n';
        return kReplicationError;
    } catch (const DomainError& e) {
        err << "aoi: " << e.what() << '\n';
        return kDomainError;
    } catch (const std::exception& e) {
        err << "aoi: " << e.what() << '\n';
        return 1;
    }
    return kUsageError;
}

}  // namespace aoi::cli
