#include "aoi/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "aoi/errors.hpp"

namespace aoi {

namespace {

using nlohmann::json;

// Thrown while walking the document; carries the dotted field path so the
// caller can anchor the message to a line.
struct FieldError {
    std::string field;
    std::string message;
};

[[noreturn]] void fail(std::string field, std::string message) { throw FieldError{std::move(field), std::move(message)}; }

std::string join(std::string_view parent, std::string_view key) {
    return parent.empty() ? std::string(key) : fmt::format("{}.{}", parent, key);
}

void reject_unknown(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) fail(join(where, key), "unknown field");
    }
}

const json& object_at(const json& parent, std::string_view where, const char* key) {
    const json& j = parent.at(key);
    if (!j.is_object()) fail(join(where, key), "expected an object");
    return j;
}

double number(const json& j, const std::string& field) {
    if (!j.is_number()) fail(field, "expected a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) fail(field, "expected a finite number");
    return v;
}

std::uint64_t unsigned_integer(const json& j, const std::string& field) {
    if (!j.is_number_unsigned()) {
        if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
        fail(field, "expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
}

std::vector<double> number_list(const json& j, const std::string& field) {
    if (!j.is_array()) fail(field, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(j[k], fmt::format("{}[{}]", field, k)));
    return out;
}

ServiceDistribution service_at(const json& j, std::string_view where) {
    if (!j.is_object()) fail(std::string(where), "expected an object");
    if (!j.contains("type") || !j["type"].is_string()) fail(join(where, "type"), "missing or non-string service type");
    const auto type = j["type"].get<std::string>();
    auto param = [&](const char* key) {
        if (!j.contains(key)) fail(join(where, key), fmt::format("missing parameter for {} service", type));
        return number(j[key], join(where, key));
    };
    try {
        if (type == "exponential") {
            reject_unknown(j, where, {"type", "rate"});
            return ServiceDistribution::exponential(param("rate"));
        }
        if (type == "gamma") {
            reject_unknown(j, where, {"type", "shape", "scale"});
            return ServiceDistribution::gamma(param("shape"), param("scale"));
        }
        if (type == "deterministic") {
            reject_unknown(j, where, {"type", "value"});
            return ServiceDistribution::deterministic(param("value"));
        }
        if (type == "uniform") {
            reject_unknown(j, where, {"type", "lower", "upper"});
            return ServiceDistribution::uniform(param("lower"), param("upper"));
        }
    } catch (const DomainError& e) {
        fail(std::string(where), e.what());
    }
    fail(join(where, "type"), fmt::format("unknown service type '{}'", type));
}

SystemConfig system_at(const json& j) {
    reject_unknown(j, "system", {"total_rate", "stream_probs", "stream_rates", "service"});
    if (!j.contains("service")) fail("system.service", "missing field");
    auto service = service_at(j["service"], "system.service");

    const bool has_probs = j.contains("stream_probs");
    const bool has_rates = j.contains("stream_rates");
    if (has_probs == has_rates) fail("system.stream_probs", "exactly one of stream_probs / stream_rates is required");

    try {
        if (has_rates) {
            auto rates = number_list(j["stream_rates"], "system.stream_rates");
            if (rates.empty()) fail("system.stream_rates", "at least one stream is required");
            for (std::size_t k = 0; k < rates.size(); ++k)
                if (!(rates[k] > 0.0)) fail(fmt::format("system.stream_rates[{}]", k), "rates must be positive");
            auto cfg = SystemConfig::from_rates(rates, service);
            if (j.contains("total_rate")) {
                double total = number(j["total_rate"], "system.total_rate");
                if (std::abs(total - cfg.total_rate()) > 1e-9) {
                    fail("system.total_rate", fmt::format("total_rate {} does not match the sum of stream_rates {}",
                                                          total, cfg.total_rate()));
                }
            }
            return cfg;
        }
        if (!j.contains("total_rate")) fail("system.total_rate", "missing field");
        double total = number(j["total_rate"], "system.total_rate");
        if (!(total > 0.0)) fail("system.total_rate", "total_rate must be positive");
        auto probs = number_list(j["stream_probs"], "system.stream_probs");
        return SystemConfig(total, std::move(probs), service);
    } catch (const DomainError& e) {
        fail(has_rates ? "system.stream_rates" : "system.stream_probs", e.what());
    }
}

SimulationSettings simulation_at(const json& j) {
    reject_unknown(j, "simulation", {"max_time", "min_deliveries_per_stream", "seed", "replications", "warmup_fraction"});
    SimulationSettings s;
    const bool has_time = j.contains("max_time");
    const bool has_count = j.contains("min_deliveries_per_stream");
    if (has_time == has_count)
        fail("simulation.max_time", "exactly one of max_time / min_deliveries_per_stream is required");
    if (has_time) {
        double t = number(j["max_time"], "simulation.max_time");
        if (!(t > 0.0)) fail("simulation.max_time", "max_time must be positive");
        s.stop = MaxTime{t};
    } else {
        auto n = unsigned_integer(j["min_deliveries_per_stream"], "simulation.min_deliveries_per_stream");
        if (n < 1) fail("simulation.min_deliveries_per_stream", "must be at least 1");
        s.stop = MinDeliveries{n};
    }
    if (j.contains("seed")) s.seed = unsigned_integer(j["seed"], "simulation.seed");
    if (j.contains("replications")) {
        s.replications = unsigned_integer(j["replications"], "simulation.replications");
        if (s.replications < 1) fail("simulation.replications", "must be at least 1");
    }
    if (j.contains("warmup_fraction")) {
        s.warmup_fraction = number(j["warmup_fraction"], "simulation.warmup_fraction");
        if (!(s.warmup_fraction >= 0.0 && s.warmup_fraction < 1.0))
            fail("simulation.warmup_fraction", "must lie in [0, 1)");
    }
    return s;
}

std::size_t line_of_field(std::string_view text, const std::string& field) {
    // Anchor on the last path component, e.g. "stream_probs" of
    // "system.stream_probs[2]".
    std::string key = field;
    if (auto dot = key.rfind('.'); dot != std::string::npos) key = key.substr(dot + 1);
    if (auto bracket = key.find('['); bracket != std::string::npos) key = key.substr(0, bracket);
    const auto pos = text.find(fmt::format("\"{}\"", key));
    if (pos == std::string_view::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

std::string anchored(std::string_view source, std::size_t line, std::string_view message) {
    if (line == 0) return fmt::format("{}: {}", source, message);
    return fmt::format("{}:{}: {}", source, line, message);
}

}  // namespace

SimParams RunConfig::sim_params() const {
    if (!simulation) throw ConfigError("configuration has no simulation section", 0);
    SimParams p{system};
    p.stop = simulation->stop;
    p.seed = simulation->seed;
    p.replications = simulation->replications;
    p.warmup_fraction = simulation->warmup_fraction;
    for (double s : mgf_s_values)
        if (s < 0.0) p.mgf_probes.push_back(s);
    return p;
}

ServiceDistribution parse_service(const json& j) {
    try {
        return service_at(j, "service");
    } catch (const FieldError& e) {
        throw ConfigError(fmt::format("{}: {}", e.field, e.message), 0);
    }
}

json service_to_json(const ServiceDistribution& service) {
    return std::visit(
        [](const auto& d) -> json {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Exponential>) return {{"type", "exponential"}, {"rate", d.rate}};
            else if constexpr (std::is_same_v<T, Gamma>) return {{"type", "gamma"}, {"shape", d.shape}, {"scale", d.scale}};
            else if constexpr (std::is_same_v<T, Deterministic>) return {{"type", "deterministic"}, {"value", d.value}};
            else return {{"type", "uniform"}, {"lower", d.lower}, {"upper", d.upper}};
        },
        service.law());
}

RunConfig parse_run_config(std::string_view text, std::string_view source_name) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto byte = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
        throw ConfigError(anchored(source_name, line, fmt::format("parse error: {}", e.what())), line);
    }
    try {
        if (!doc.is_object()) fail("", "top level must be an object");
        reject_unknown(doc, "", {"system", "simulation", "probes", "output"});
        if (!doc.contains("system")) fail("system", "missing section");
        RunConfig cfg{system_at(object_at(doc, "", "system"))};
        if (doc.contains("simulation")) cfg.simulation = simulation_at(object_at(doc, "", "simulation"));
        if (doc.contains("probes")) {
            const auto& probes = object_at(doc, "", "probes");
            reject_unknown(probes, "probes", {"mgf_s_values"});
            if (probes.contains("mgf_s_values")) {
                cfg.mgf_s_values = number_list(probes["mgf_s_values"], "probes.mgf_s_values");
                for (std::size_t k = 0; k < cfg.mgf_s_values.size(); ++k) {
                    if (cfg.mgf_s_values[k] > 0.0) {
                        fail(fmt::format("probes.mgf_s_values[{}]", k),
                             fmt::format("s = {} rejected: only s <= 0 is allowed for empirical MGF checks",
                                         cfg.mgf_s_values[k]));
                    }
                }
            }
        }
        if (doc.contains("output")) {
            const auto& out = object_at(doc, "", "output");
            reject_unknown(out, "output", {"format", "path", "trace_path"});
            if (out.contains("format")) {
                const auto& f = out["format"];
                if (f == "csv") cfg.output.format = OutputFormat::csv;
                else if (f == "json") cfg.output.format = OutputFormat::json;
                else fail("output.format", "expected \"csv\" or \"json\"");
            }
            for (const char* key : {"path", "trace_path"}) {
                if (!out.contains(key)) continue;
                if (!out[key].is_string()) fail(join("output", key), "expected a string");
                (std::string_view(key) == "path" ? cfg.output.path : cfg.output.trace_path) = out[key].get<std::string>();
            }
        }
        return cfg;
    } catch (const FieldError& e) {
        const auto line = line_of_field(text, e.field);
        throw ConfigError(anchored(source_name, line, fmt::format("{}: {}", e.field, e.message)), line);
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("{}: cannot open configuration file", path.string()), 0);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str(), path.string());
}

}  // namespace aoi
