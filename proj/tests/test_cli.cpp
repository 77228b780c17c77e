#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <unistd.h>
#include <nlohmann/json.hpp>

#include "aoi/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = aoi::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class Scratch {
public:
    Scratch() {
        static std::atomic<int> counter{0};
        dir_ = fs::temp_directory_path() / ("aoi_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(dir_);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }
    std::string write(const std::string& name, const std::string& content) const {
        const auto path = dir_ / name;
        std::ofstream(path) << content;
        return path.string();
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kReference = R"({
  "system": {
    "total_rate": 1.5,
    "stream_probs": [0.5, 0.3, 0.2],
    "service": {"type": "exponential", "rate": 1.0}
  },
  "simulation": {"max_time": 50000, "seed": 42, "replications": 8, "warmup_fraction": 0.05},
  "probes": {"mgf_s_values": [0, -0.5, -1]}
}
)";

const char* kSingle = R"({
  "system": {
    "total_rate": 1.0,
    "stream_probs": [1.0],
    "service": {"type": "exponential", "rate": 1.0}
  }
}
)";

// Header-keyed rows of a simple CSV (no quoted commas in numeric reports).
std::vector<std::map<std::string, std::string>> parse_csv(const std::string& text) {
    std::vector<std::map<std::string, std::string>> rows;
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        if (header.empty()) {
            header = split(line);
            continue;
        }
        const auto cells = split(line);
        std::map<std::string, std::string> row;
        for (std::size_t c = 0; c < header.size() && c < cells.size(); ++c) row[header[c]] = cells[c];
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

TEST_CASE("analyze reports the closed forms") {
    Scratch dir;
    const auto cfg = dir.write("ref.json", kReference);
    const auto r = invoke({"analyze", "-c", cfg});
    REQUIRE(r.code == aoi::cli::kOk);
    const auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].at("stream") == "1");
    CHECK(rows[0].at("avg_age") == "3.333333");
    CHECK(rows[0].at("peak_age") == "3.733333");
    CHECK(rows[3].at("stream") == "total");
    CHECK(std::stod(rows[3].at("avg_age")) == doctest::Approx(17.2222).epsilon(1e-5));
    CHECK(r.out.find('\r') == std::string::npos);
}

TEST_CASE("analyze with a single stream") {
    Scratch dir;
    const auto r = invoke({"analyze", "-c", dir.write("one.json", kSingle)});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(r.out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].at("avg_age") == rows[1].at("avg_age"));
    CHECK(rows[0].at("peak_age") == rows[1].at("peak_age"));
    CHECK(rows[0].at("avg_age") == "2.000000");
}

TEST_CASE("config errors are line-anchored and exit 2") {
    Scratch dir;
    const auto bad = dir.write("bad.json", R"({
  "system": {
    "total_rate": 1.5,
    "stream_probs": [0.5, 0.2, 0.2],
    "service": {"type": "exponential", "rate": 1.0}
  }
}
)");
    auto r = invoke({"analyze", "-c", bad});
    CHECK(r.code == aoi::cli::kUsageError);
    CHECK(r.err.find("stream_probs") != std::string::npos);
    CHECK(r.err.find("bad.json:4:") != std::string::npos);

    const auto typo = dir.write("typo.json", R"({"system": {"total_rate": 1, "stream_probs": [1],
  "service": {"type": "exponential", "rate": 1}, "totl": 2}})");
    r = invoke({"analyze", "-c", typo});
    CHECK(r.code == 2);
    CHECK(r.err.find("totl") != std::string::npos);

    r = invoke({"analyze", "-c", dir.write("syntax.json", "{\n  \"system\": [\n")});
    CHECK(r.code == 2);

    r = invoke({"analyze", "-c", dir.path("missing.json")});
    CHECK(r.code == 2);

    const auto rates = dir.write("rates.json", R"({"system": {"total_rate": 2.0, "stream_rates": [0.75, 0.45, 0.3],
  "service": {"type": "exponential", "rate": 1}}})");
    CHECK(invoke({"analyze", "-c", rates}).code == 2);

    const auto good_rates = dir.write("good_rates.json", R"({"system": {"stream_rates": [0.75, 0.45, 0.3],
  "service": {"type": "exponential", "rate": 1}}})");
    r = invoke({"analyze", "-c", good_rates});
    REQUIRE(r.code == 0);
    CHECK(parse_csv(r.out)[0].at("avg_age") == "3.333333");

    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({}).code == 2);
}

TEST_CASE("sweep values outside the parameter domain exit 2") {
    Scratch dir;
    const auto cfg = dir.write("ref.json", kReference);
    CHECK(invoke({"sweep", "-c", cfg, "--param", "rate", "--grid", "1,-1"}).code == 2);
    CHECK(invoke({"sweep", "-c", cfg, "--param", "p2", "--grid", "1.5"}).code == 2);
    CHECK(invoke({"sweep", "-c", cfg, "--param", "p4", "--grid", "0.5"}).code == 2);
}

TEST_CASE("simulate is deterministic and joins with analyze") {
    Scratch dir;
    const auto cfg = dir.write("ref.json", kReference);
    const auto a = invoke({"simulate", "-c", cfg, "-o", dir.path("a.csv")});
    const auto b = invoke({"simulate", "-c", cfg, "-o", dir.path("b.csv")});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const auto text = read_file(dir.path("a.csv"));
    CHECK(!text.empty());
    CHECK(text == read_file(dir.path("b.csv")));

    const auto sim_rows = parse_csv(text);
    const auto ana_rows = parse_csv(invoke({"analyze", "-c", cfg}).out);
    REQUIRE(sim_rows.size() == ana_rows.size());
    for (std::size_t k = 0; k < sim_rows.size(); ++k) {
        CHECK(sim_rows[k].at("stream") == ana_rows[k].at("stream"));
        for (const char* col : {"lambda_i", "p_i", "avg_age", "peak_age", "mean_T", "mean_Y", "mean_Y2",
                                "delivery_rate"})
            CHECK(sim_rows[k].count(col) == 1);
        CHECK(sim_rows[k].at("avg_age_analytic") == ana_rows[k].at("avg_age"));
    }
    CHECK(sim_rows[0].count("mgf_Y[s=-0.5]") == 1);
    CHECK(std::abs(std::stod(sim_rows[0].at("avg_age")) - 10.0 / 3.0) < 0.1);
}

TEST_CASE("AOI_SEED overrides the configured seed") {
    Scratch dir;
    const auto cfg = dir.write("ref.json", kReference);
    const auto base = invoke({"simulate", "-c", cfg}).out;
    ::setenv("AOI_SEED", "42", 1);
    const auto same = invoke({"simulate", "-c", cfg}).out;
    ::setenv("AOI_SEED", "43", 1);
    const auto other = invoke({"simulate", "-c", cfg}).out;
    ::setenv("AOI_SEED", "forty", 1);
    const auto bad = invoke({"simulate", "-c", cfg});
    ::unsetenv("AOI_SEED");
    CHECK(same == base);
    CHECK(other != base);
    CHECK(bad.code == 2);
}

TEST_CASE("simulate writes a time-sorted trace") {
    Scratch dir;
    const auto cfg = dir.write("short.json", R"({
  "system": {"total_rate": 1.5, "stream_probs": [0.5, 0.3, 0.2], "service": {"type": "exponential", "rate": 1.0}},
  "simulation": {"max_time": 10, "seed": 42, "replications": 1}
})");
    const auto trace = dir.path("trace.csv");
    const auto r = invoke({"simulate", "-c", cfg, "--trace", trace});
    REQUIRE(r.code == 0);
    const auto rows = parse_csv(read_file(trace));
    REQUIRE(!rows.empty());
    double prev = 0.0;
    for (const auto& row : rows) {
        const double t = std::stod(row.at("time"));
        CHECK(t >= prev);
        prev = t;
        const auto& kind = row.at("kind");
        CHECK((kind == "arrival" || kind == "delivery" || kind == "preemption"));
    }
    const auto no_sim = dir.write("nosim.json", kSingle);
    CHECK(invoke({"simulate", "-c", no_sim}).code == 2);
}

TEST_CASE("validate runs the oracle battery") {
    Scratch dir;
    const auto cfg = dir.write("ref.json", kReference);
    const auto r = invoke({"validate", "-c", cfg, "--format", "json"});
    CHECK(r.code == 0);
    const auto doc = json::parse(r.out);
    CHECK(doc["passed"] == true);
    CHECK(doc["rows"].size() >= 8);
    std::map<std::string, int> seen;
    for (const auto& row : doc["rows"]) {
        CHECK(row["status"] != "FAIL");
        seen[row["check"].get<std::string>()]++;
    }
    for (const char* name : {"mgf_Y_transfer_function", "mgf_Y_elimination", "mgf_Y_path_enumeration",
                             "moment_mean_T", "moment_second_Y", "clock_mgf_B", "sim_avg_age", "sim_mgf_Y"})
        CHECK(seen[name] > 0);

    const auto failed = invoke({"validate", "-c", cfg, "--expect", "avg_age_1=99", "-o", dir.path("v.csv")});
    CHECK(failed.code == aoi::cli::kCheckFailed);
    const auto rows = parse_csv(read_file(dir.path("v.csv")));
    bool found = false;
    for (const auto& row : rows)
        if (row.at("check") == "expect:avg_age_1") found = row.at("status") == "FAIL";
    CHECK(found);

    const auto ok = invoke({"validate", "-c", dir.write("one.json", kSingle), "--expect", "avg_age_1=2"});
    CHECK(ok.code == 0);
    CHECK(invoke({"validate", "-c", cfg, "--expect", "nonsense=1"}).code == 2);

    const auto positive = dir.write("pos.json", R"({
  "system": {"total_rate": 1.5, "stream_probs": [0.5, 0.3, 0.2], "service": {"type": "exponential", "rate": 1.0}},
  "probes": {"mgf_s_values": [1.35]}
})");
    const auto rejected = invoke({"validate", "-c", positive});
    CHECK(rejected.code == 2);
    CHECK(rejected.err.find("only s <= 0 is allowed") != std::string::npos);
}

TEST_CASE("optimize") {
    auto r = invoke({"optimize", "--rate", "1.5", "--streams", "3", "--service", "exponential", "--mu", "1",
                     "--format", "json"});
    REQUIRE(r.code == 0);
    const auto doc = json::parse(r.out);
    CHECK(doc["delta_tot_star"].get<double>() == doctest::Approx(15.0).epsilon(1e-12));
    CHECK(doc["delta_peak_tot_star"].get<double>() == doctest::Approx(16.2).epsilon(1e-12));
    CHECK(doc["verification"]["max_violation"].get<double>() == 0.0);
    CHECK(doc["p_star"].size() == 3);

    r = invoke({"optimize", "--rate", "1", "--streams", "1", "--service", "deterministic", "--value", "1"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("p_star,1,1.000000") != std::string::npos);

    CHECK(invoke({"optimize", "--rate", "0", "--streams", "3", "--service", "exponential", "--mu", "1"}).code == 2);
    CHECK(invoke({"optimize", "--rate", "1", "--streams", "3", "--service", "gamma", "--shape", "2"}).code == 2);
    CHECK(invoke({"optimize", "--rate", "1", "--streams", "3", "--service", "weibull"}).code == 2);
}

TEST_CASE("sweep") {
    Scratch dir;
    const auto cfg = dir.write("ref.json", kReference);
    auto r = invoke({"sweep", "-c", cfg, "--param", "p1", "--grid", "0.2,1/3,0.5,0.8"});
    REQUIRE(r.code == 0);
    std::vector<double> age1;
    for (const auto& row : parse_csv(r.out))
        if (row.at("stream") == "1") age1.push_back(std::stod(row.at("avg_age")));
    REQUIRE(age1.size() == 4);
    for (std::size_t k = 1; k < age1.size(); ++k) CHECK(age1[k] < age1[k - 1]);

    const auto single = dir.write("one.json", kSingle);
    r = invoke({"sweep", "-c", single, "--param", "total_rate", "--grid", "0.5,1,2", "--format", "json"});
    REQUIRE(r.code == 0);
    std::vector<double> ages;
    const auto doc = json::parse(r.out);
    for (const auto& row : doc["rows"])
        if (row["stream"] == 1) ages.push_back(row["avg_age"].get<double>());
    REQUIRE(ages.size() == 3);
    CHECK(ages[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(ages[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ages[2] == doctest::Approx(1.5).epsilon(1e-12));

    r = invoke({"sweep", "-c", cfg, "--param", "total_rate", "--grid", "0.5", "--simulate"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("simulated") != std::string::npos);

    CHECK(invoke({"sweep", "-c", cfg, "--param", "total_rate", "--grid", ""}).code == 2);
    CHECK(invoke({"sweep", "-c", cfg, "--param", "total_rate", "--grid", "1,,2"}).code == 2);
    CHECK(invoke({"sweep", "-c", cfg, "--param", "shape", "--grid", "1"}).code == 2);
}

TEST_CASE("JSON reports round-trip and failures leave no files") {
    Scratch dir;
    const auto cfg = dir.write("ref.json", kReference);
    for (const char* cmd : {"analyze", "simulate", "validate"}) {
        const auto out = dir.path(std::string(cmd) + ".json");
        REQUIRE(invoke({cmd, "-c", cfg, "--format", "json", "-o", out}).code == 0);
        const auto doc = json::parse(read_file(out));
        CHECK(doc["command"] == cmd);
        CHECK(doc["columns"].is_array());
        for (const auto& row : doc["rows"]) CHECK(row.size() == doc["columns"].size());
        CHECK(json::parse(doc.dump()) == doc);
    }

    const auto bad = dir.write("bad.json", R"({"system": {"total_rate": -1, "stream_probs": [1],
  "service": {"type": "exponential", "rate": 1}}})");
    const auto target = dir.path("never.csv");
    CHECK(invoke({"analyze", "-c", bad, "-o", target}).code == 2);
    CHECK(!fs::exists(target));
    CHECK(invoke({"validate", "-c", cfg, "--expect", "avg_age_1=99", "-o", target}).code == 5);
    CHECK(fs::exists(target));
    for (const auto& entry : fs::directory_iterator(dir.dir()))
        CHECK(entry.path().filename().string().find(".tmp.") == std::string::npos);
}
