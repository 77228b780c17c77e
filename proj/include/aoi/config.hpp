#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aoi/analytic.hpp"
#include "aoi/simulator.hpp"

namespace aoi {

// Malformed or invalid run configuration. line() is 1-based, 0 if unknown.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, std::size_t line) : std::runtime_error(message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

enum class OutputFormat { csv, json };

struct SimulationSettings {
    StopRule stop = MaxTime{1e6};
    std::uint64_t seed = 1;
    std::size_t replications = 1;
    double warmup_fraction = 0.05;
};

struct OutputSettings {
    OutputFormat format = OutputFormat::csv;
    std::optional<std::string> path;
    std::optional<std::string> trace_path;
};

struct RunConfig {
    SystemConfig system;
    std::optional<SimulationSettings> simulation;
    std::vector<double> mgf_s_values;
    OutputSettings output;

    SimParams sim_params() const;
};

// JSON document:
//   {"system": {"total_rate": x, "stream_probs": [...] | "stream_rates": [...],
//               "service": {"type": "exponential", "rate": mu} | ...},
//    "simulation": {"max_time": t | "min_deliveries_per_stream": n, "seed": s,
//                   "replications": r, "warmup_fraction": f},
//    "probes": {"mgf_s_values": [s <= 0, ...]},
//    "output": {"format": "csv" | "json", "path": p, "trace_path": p}}
// Only "system" is required. Unknown fields are rejected.
RunConfig parse_run_config(std::string_view text, std::string_view source_name = "config");
RunConfig load_run_config(const std::filesystem::path& path);

// Service spelling {"type": ..., <parameters>}.
ServiceDistribution parse_service(const nlohmann::json& j);
nlohmann::json service_to_json(const ServiceDistribution& service);

}  // namespace aoi
