#pragma once

// Scenario files, batch runs over seeds, aggregation into tables, CSV and SVG.

#include "lockss/metrics.hpp"
#include "lockss/world.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lockss::experiments {

struct ScenarioConfig {
    std::string name = "scenario";
    sim::WorldConfig world;
    std::vector<std::uint64_t> seeds{1};
    std::size_t workers = 1;
    std::string out_dir = ".";
    bool keep_logs = false;
};

// Flat `key = value` lines, `#` starts a comment. Unknown keys are errors.
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin = "<scenario>");
ScenarioConfig load_scenario(const std::filesystem::path& path);
void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> setting_keys();
// Seeds as "1,2,5" or "1..20" (inclusive).
std::vector<std::uint64_t> parse_seeds(const std::string& text);

// Canonical text of everything but the seed list and plumbing; equal strings
// mean runs are comparable.
std::string fingerprint(const ScenarioConfig& cfg);

struct RunResult {
    std::uint64_t seed = 0;
    std::string fingerprint;
    metrics::RunSummary summary;
    metrics::MetricsLog log;  // empty unless keep_logs
};

// One run per seed on up to `workers` threads. Results come back in seed-list order.
std::vector<RunResult> run_scenario(const ScenarioConfig& cfg);

struct Stats {
    std::size_t count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, avg = 0;
};
// Quartiles by linear interpolation between order statistics.
Stats describe(std::vector<double> values);

// The aggregated view of a set of runs sharing one configuration.
struct Aggregate {
    std::size_t runs = 0;
    double no_alarm_fraction = 0;
    double irrecoverable_fraction = 0;
    // Pooled: total simulated time over total alarms, infinite without alarms.
    double system_interalarm_days = 0;
    double per_peer_interalarm_years = 0;
    Stats system_interalarm;     // per-run, days; runs without alarms excluded
    Stats first_alarm_days;      // runs without alarms excluded
    Stats max_damaged_loyal;     // fraction of the population
    Stats max_foothold;
    Stats avg_foothold;
    Stats final_foothold;
    Stats mean_interpoll_days;
    Stats median_first_interpoll_alarm_days;  // runs where most peers never alarmed excluded
};
Aggregate aggregate(std::span<const RunResult> runs);

// A table of text cells; numbers are written in shortest round-trip form.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    bool operator==(const Table&) const = default;
    std::size_t column(const std::string& name) const;  // throws ConfigError
};

std::string format_number(double v);
double parse_number(const std::string& s);

Table summary_table(std::span<const RunResult> runs);
// One row per swept value: param, runs, no_alarm_fraction, irrecoverable_fraction,
// pooled inter-alarm times, then min/q1/median/q3/max/avg for each statistic.
Table aggregate_table(const std::string& param, std::span<const std::string> values,
                      std::span<const Aggregate> aggregates);

std::string to_csv(const Table& t);
Table from_csv(const std::string& text);
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

enum class ChartStyle { Line, ErrorBars, Quartiles };
struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    ChartStyle style = ChartStyle::Line;
    std::string x_column;
    // Line: one series per column. ErrorBars: stems `<s>_min`, `<s>_avg`, `<s>_max`.
    // Quartiles: stems with `_min`, `_q1`, `_median`, `_q3`, `_max`.
    std::vector<std::string> series;
};
std::string render_svg(const Table& t, const ChartSpec& spec);
// Picks a style from the column names: error bars or quartiles when the
// suffixes are there, else one line per numeric column against the first.
ChartSpec infer_chart(const Table& t, const std::string& title);

}  // namespace lockss::experiments
