#include "lockss/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>

namespace ex = lockss::experiments;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Common {
    std::vector<std::uint64_t> seeds;
    std::string seed_list;
    std::size_t workers = 0;
    std::string out;
    std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--seed", c.seeds, "Run only these seeds (repeatable)");
    cmd->add_option("--seeds", c.seed_list, "Seed list, e.g. 1..20 or 1,4,9");
    cmd->add_option("--workers", c.workers, "Concurrent runs");
    cmd->add_option("--out", c.out, "Output directory");
    cmd->add_option("--set", c.sets, "Override a scenario key, key=value (repeatable)");
}

ex::ScenarioConfig prepare(const std::string& file, const Common& c)
{
    auto cfg = ex::load_scenario(file);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw lockss::ConfigError("--set expects key=value, got '" + kv + "'");
        ex::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.seed_list.empty()) cfg.seeds = ex::parse_seeds(c.seed_list);
    if (!c.seeds.empty()) cfg.seeds = c.seeds;
    if (c.workers) cfg.workers = c.workers;
    if (!c.out.empty()) cfg.out_dir = c.out;
    return cfg;
}

std::string default_metric(const ex::ScenarioConfig& cfg)
{
    switch (cfg.world.adversary.strategy) {
    case lockss::adversary::Strategy::None: return "run_interalarm_days";
    case lockss::adversary::Strategy::Stealth:
        return cfg.world.adversary.phase == lockss::adversary::StealthPhase::Lurk ? "final_foothold"
                                                                                : "max_damaged_loyal";
    case lockss::adversary::Strategy::Nuisance: return "first_alarm_days";
    case lockss::adversary::Strategy::Attrition: return "mean_interpoll_days";
    }
    return "run_interalarm_days";
}

void print_aggregate(const std::string& label, const ex::Aggregate& a)
{
    std::printf("%s: runs=%zu no_alarm=%.3f irrecoverable=%.3f interalarm=%.2fd (per peer %.1fy) "
                "max_damaged_loyal(avg)=%.4f final_foothold(avg)=%.3f mean_interpoll(avg)=%.1fd\n",
                label.c_str(), a.runs, a.no_alarm_fraction, a.irrecoverable_fraction, a.system_interalarm_days,
                a.per_peer_interalarm_years, a.max_damaged_loyal.avg, a.final_foothold.avg, a.mean_interpoll_days.avg);
}

int cmd_run(const std::string& file, const Common& c)
{
    const auto cfg = prepare(file, c);
    const auto runs = ex::run_scenario(cfg);
    const auto agg = ex::aggregate(runs);
    const fs::path dir = cfg.out_dir;
    ex::write_file(dir / (cfg.name + "_runs.csv"), ex::to_csv(ex::summary_table(runs)));
    const std::vector<std::string> values{cfg.name};
    ex::write_file(dir / (cfg.name + "_aggregate.csv"),
                   ex::to_csv(ex::aggregate_table("scenario", values, std::span(&agg, 1))));
    print_aggregate(cfg.name, agg);
    return 0;
}

int cmd_sweep(const std::string& file, const std::string& param, const std::string& metric, const Common& c)
{
    const auto eq = param.find('=');
    if (eq == std::string::npos) throw lockss::ConfigError("--param expects key=v1,v2,..., got '" + param + "'");
    const std::string key = param.substr(0, eq);
    std::vector<std::string> values;
    std::string cur;
    for (char ch : param.substr(eq + 1) + ",") {
        if (ch == ',') {
            if (!cur.empty()) values.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (values.empty()) throw lockss::ConfigError("--param has no values");
    const auto base = prepare(file, c);

    std::vector<ex::Aggregate> aggs;
    for (const auto& v : values) {
        auto cfg = base;
        ex::apply_setting(cfg, key, v);
        auto runs = ex::run_scenario(cfg);
        aggs.push_back(ex::aggregate(runs));
        print_aggregate(key + "=" + v, aggs.back());
    }
    const fs::path dir = base.out_dir;
    const auto table = ex::aggregate_table(key, values, aggs);
    ex::write_file(dir / (base.name + "_" + key + ".csv"), ex::to_csv(table));

    ex::ChartSpec spec;
    spec.title = base.name + ": " + (metric.empty() ? default_metric(base) : metric) + " by " + key;
    spec.x_column = key;
    spec.x_label = key;
    spec.series = {metric.empty() ? default_metric(base) : metric};
    spec.y_label = spec.series.front();
    spec.style = ex::ChartStyle::Quartiles;
    ex::write_file(dir / (base.name + "_" + key + ".svg"), ex::render_svg(table, spec));

    if (key == "damage_mtbf_years") {
        ex::Table mtbf;
        mtbf.header = {"mtbf_years", "min_rate", "avg_rate", "max_rate"};
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto& s = aggs[i].system_interalarm;
            mtbf.rows.push_back({values[i], ex::format_number(s.count ? s.min : kInf),
                                 ex::format_number(aggs[i].system_interalarm_days),
                                 ex::format_number(s.count ? s.max : kInf)});
        }
        ex::write_file(dir / "mtbf.csv", ex::to_csv(mtbf));
    }
    return 0;
}

int cmd_plot(const std::string& csv, const std::string& out, const std::string& title, const std::string& x,
             const std::string& series, const std::string& style)
{
    const auto table = ex::from_csv(ex::read_file(csv));
    auto spec = ex::infer_chart(table, title.empty() ? fs::path(csv).stem().string() : title);
    if (!x.empty()) {
        spec.x_column = x;
        spec.x_label = x;
    }
    if (!style.empty()) {
        if (style == "line") spec.style = ex::ChartStyle::Line;
        else if (style == "bars") spec.style = ex::ChartStyle::ErrorBars;
        else if (style == "quartiles") spec.style = ex::ChartStyle::Quartiles;
        else throw lockss::ConfigError("unknown plot style '" + style + "'");
    }
    if (!series.empty()) {
        spec.series = {series};
        spec.y_label = series;
    }
    ex::write_file(out, ex::render_svg(table, spec));
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Discrete-event simulator for a rate-limited sampled-voting preservation network"};
    app.require_subcommand(1);

    Common run_opts, sweep_opts;
    std::string run_file, sweep_file, param, metric;
    auto* run = app.add_subcommand("run", "Run a scenario over its seeds");
    run->add_option("scenario", run_file, "Scenario file")->required();
    add_common(run, run_opts);

    auto* sweep = app.add_subcommand("sweep", "Run a scenario once per value of one key");
    sweep->add_option("scenario", sweep_file, "Scenario file")->required();
    sweep->add_option("--param", param, "key=v1,v2,...")->required();
    sweep->add_option("--metric", metric, "Statistic drawn in the SVG");
    add_common(sweep, sweep_opts);

    std::string csv, svg, title, xcol, series, style;
    auto* plot = app.add_subcommand("plot", "Draw a CSV table as SVG");
    plot->add_option("csv", csv, "Input table")->required();
    plot->add_option("-o,--output", svg, "Output SVG")->required();
    plot->add_option("--title", title);
    plot->add_option("--x", xcol, "X column");
    plot->add_option("--series", series, "Column, or stem with _min/_avg/_max or quartile suffixes");
    plot->add_option("--style", style, "line, bars or quartiles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(lockss::ErrorKind::Config);
    }

    try {
        if (*run) return cmd_run(run_file, run_opts);
        if (*sweep) return cmd_sweep(sweep_file, param, metric, sweep_opts);
        if (*plot) return cmd_plot(csv, svg, title, xcol, series, style);
    } catch (const lockss::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
