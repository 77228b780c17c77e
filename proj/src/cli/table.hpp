#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace aoi::cli {

using Cell = std::variant<std::monostate, std::string, double, std::int64_t>;

// Column-oriented report rendered as CSV (header row, LF endings) or as the
// JSON object {"command": ..., "columns": [...], "rows": [{column: value}]}.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

// Table number format: 6 decimals, scientific for magnitudes below 1e-3 or
// at least 1e15, "nan"/"inf" for non-finite values.
std::string format_number(double x);

std::string to_csv(const Table& table);
nlohmann::json to_json(const Table& table, const std::string& command);

// Writes `content` to `path` through a temporary file in the same directory
// and a rename, so a failed run never leaves a partial file.
void write_atomic(const std::filesystem::path& path, const std::string& content);

// To `path` when set, otherwise to `out`.
void emit(const std::optional<std::string>& path, const std::string& content, std::ostream& out);

}  // namespace aoi::cli
