#include "lockss/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace lockss::experiments {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double to_double(const std::string& key, const std::string& v)
{
    try {
        return parse_number(v);
    } catch (const ConfigError&) {
        throw ConfigError("setting '" + key + "': expected a number, got '" + v + "'");
    }
}

std::size_t to_count(const std::string& key, const std::string& v)
{
    std::size_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("setting '" + key + "': expected a count, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError("setting '" + key + "': expected true or false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

protocol::AlarmKind parse_alarm(const std::string& s)
{
    for (auto k : {protocol::AlarmKind::InconclusivePoll, protocol::AlarmKind::LocalSpoofing,
                   protocol::AlarmKind::InterPollInterval})
        if (s == protocol::to_string(k)) return k;
    throw ConfigError("unknown alarm kind '" + s + "'");
}

struct Setting {
    std::function<void(ScenarioConfig&, const std::string&)> set;
    std::function<std::string(const ScenarioConfig&)> get;
    bool plumbing = false;  // not part of the fingerprint
};

using Settings = std::map<std::string, Setting>;

#define COUNT_SETTING(key, field)                                                              \
    m[key] = {[](ScenarioConfig& c, const std::string& v) { c.field = to_count(key, v); },     \
              [](const ScenarioConfig& c) { return std::to_string(c.field); }}
#define REAL_SETTING(key, field, scale)                                                        \
    m[key] = {[](ScenarioConfig& c, const std::string& v) { c.field = to_double(key, v) * (scale); }, \
              [](const ScenarioConfig& c) { return format_number(c.field / (scale)); }}
#define BOOL_SETTING(key, field)                                                               \
    m[key] = {[](ScenarioConfig& c, const std::string& v) { c.field = to_bool(key, v); },      \
              [](const ScenarioConfig& c) { return from_bool(c.field); }}

const Settings& settings()
{
    static const Settings table = [] {
        Settings m;
        m["name"] = {[](ScenarioConfig& c, const std::string& v) { c.name = v; },
                     [](const ScenarioConfig& c) { return c.name; }, true};
        m["seeds"] = {[](ScenarioConfig& c, const std::string& v) { c.seeds = parse_seeds(v); },
                      [](const ScenarioConfig& c) {
                          std::string s;
                          for (auto x : c.seeds) s += (s.empty() ? "" : ",") + std::to_string(x);
                          return s;
                      },
                      true};
        m["workers"] = {[](ScenarioConfig& c, const std::string& v) { c.workers = to_count("workers", v); },
                        [](const ScenarioConfig& c) { return std::to_string(c.workers); }, true};
        m["out"] = {[](ScenarioConfig& c, const std::string& v) { c.out_dir = v; },
                    [](const ScenarioConfig& c) { return c.out_dir; }, true};
        m["keep_logs"] = {[](ScenarioConfig& c, const std::string& v) { c.keep_logs = to_bool("keep_logs", v); },
                          [](const ScenarioConfig& c) { return from_bool(c.keep_logs); }, true};

        COUNT_SETTING("peers", world.peers);
        COUNT_SETTING("cluster_size", world.cluster_size);
        REAL_SETTING("intra_cluster_fraction", world.intra_cluster_fraction, 1.0);
        COUNT_SETTING("friends", world.friends);
        REAL_SETTING("horizon_years", world.horizon, kYear);
        REAL_SETTING("damage_mtbf_years", world.damage_mtbf, kYear);
        BOOL_SETTING("stop_on_alarm", world.stop_on_alarm);
        m["stop_kinds"] = {[](ScenarioConfig& c, const std::string& v) {
                               c.world.stop_kinds.clear();
                               if (v.empty() || v == "any") return;
                               for (const auto& s : split(v, ',')) c.world.stop_kinds.push_back(parse_alarm(s));
                           },
                           [](const ScenarioConfig& c) {
                               std::string s;
                               for (auto k : c.world.stop_kinds) s += (s.empty() ? "" : ",") + std::string(to_string(k));
                               return s.empty() ? std::string("any") : s;
                           }};
        BOOL_SETTING("record_polls", world.record_polls);
        REAL_SETTING("snapshot_days", world.snapshot_spacing, kDay);

        COUNT_SETTING("N", world.protocol.inner_size);
        COUNT_SETTING("Q", world.protocol.quorum);
        COUNT_SETTING("D", world.protocol.max_minority);
        COUNT_SETTING("A", world.protocol.max_discredited);
        COUNT_SETTING("I", world.protocol.nominations);
        m["E_age"] = {[](ScenarioConfig& c, const std::string& v) { c.world.protocol.max_entry_age = to_count("E_age", v); },
                      [](const ScenarioConfig& c) { return std::to_string(c.world.protocol.max_entry_age); }};
        REAL_SETTING("R_months", world.protocol.mean_interval, kMonth);
        REAL_SETTING("churn", world.protocol.churn, 1.0);
        REAL_SETTING("reference_target_multiplier", world.protocol.ref_target_multiplier, 1.0);
        REAL_SETTING("interval_jitter", world.protocol.interval_jitter, 1.0);
        REAL_SETTING("abort_retry_hours", world.protocol.abort_retry_delay, kHour);
        BOOL_SETTING("prior_friend_history", world.protocol.prior_friend_history);
        BOOL_SETTING("stagger_first_poll", world.protocol.stagger_first_poll);
        BOOL_SETTING("known_repairers_only", world.protocol.known_repairers_only);

        COUNT_SETTING("effort_blocks", world.effort.blocks);
        REAL_SETTING("E_mbf", world.effort.mbf_asymmetry, 1.0);
        REAL_SETTING("E_p", world.effort.poll_asymmetry, 1.0);
        REAL_SETTING("au_hash_seconds", world.effort.seconds_per_S, 1.0);
        REAL_SETTING("au_megabytes", world.net.au_bytes, 1024.0 * 1024.0);

        m["strategy"] = {[](ScenarioConfig& c, const std::string& v) { c.world.adversary.strategy = adversary::parse_strategy(v); },
                         [](const ScenarioConfig& c) { return std::string(to_string(c.world.adversary.strategy)); }};
        m["phase"] = {[](ScenarioConfig& c, const std::string& v) {
                          if (v == "lurk") c.world.adversary.phase = adversary::StealthPhase::Lurk;
                          else if (v == "attack") c.world.adversary.phase = adversary::StealthPhase::Attack;
                          else throw ConfigError("setting 'phase': expected lurk or attack, got '" + v + "'");
                      },
                      [](const ScenarioConfig& c) {
                          return std::string(c.world.adversary.phase == adversary::StealthPhase::Lurk ? "lurk" : "attack");
                      }};
        REAL_SETTING("subversion", world.adversary.subversion, 1.0);
        m["subverted"] = {[](ScenarioConfig& c, const std::string& v) {
                              if (v.empty() || v == "auto") c.world.adversary.subverted.reset();
                              else c.world.adversary.subverted = to_count("subverted", v);
                          },
                          [](const ScenarioConfig& c) {
                              return c.world.adversary.subverted ? std::to_string(*c.world.adversary.subverted)
                                                                 : std::string("auto");
                          }};
        COUNT_SETTING("extra_cpus", world.adversary.extra_cpus);
        BOOL_SETTING("unlimited_cpus", world.adversary.unlimited_cpus);
        m["extra_nics"] = {[](ScenarioConfig& c, const std::string& v) {
                               if (v.empty() || v == "auto") c.world.adversary.extra_nics.reset();
                               else c.world.adversary.extra_nics = to_count("extra_nics", v);
                           },
                           [](const ScenarioConfig& c) {
                               return c.world.adversary.extra_nics ? std::to_string(*c.world.adversary.extra_nics)
                                                                   : std::string("auto");
                           }};
        REAL_SETTING("initial_foothold", world.adversary.initial_foothold, 1.0);
        BOOL_SETTING("exact_foothold", world.adversary.exact_foothold);
        BOOL_SETTING("stealth_polls", world.adversary.stealth_polls);
        COUNT_SETTING("attrition_cpus", world.adversary.attrition_cpus);
        COUNT_SETTING("attrition_poll_size", world.adversary.attrition_poll_size);
        COUNT_SETTING("attrition_topups", world.adversary.attrition_topups);
        return m;
    }();
    return table;
}

#undef COUNT_SETTING
#undef REAL_SETTING
#undef BOOL_SETTING

}  // namespace

std::vector<std::string> setting_keys()
{
    std::vector<std::string> out;
    for (const auto& [k, s] : settings()) out.push_back(k);
    return out;
}

void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value)
{
    const auto& m = settings();
    auto it = m.find(key);
    if (it == m.end()) throw ConfigError("unknown setting '" + key + "'");
    it->second.set(cfg, value);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
    std::vector<std::uint64_t> out;
    auto num = [&](const std::string& s) {
        std::uint64_t v = 0;
        const auto* end = s.data() + s.size();
        auto [p, ec] = std::from_chars(s.data(), end, v);
        if (s.empty() || ec != std::errc() || p != end) throw ConfigError("bad seed '" + s + "'");
        return v;
    };
    for (const auto& part : split(text, ',')) {
        if (part.empty()) continue;
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(num(part));
            continue;
        }
        const auto lo = num(trim(part.substr(0, dots)));
        const auto hi = num(trim(part.substr(dots + 2)));
        if (hi < lo) throw ConfigError("empty seed range '" + part + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
    if (out.empty()) throw ConfigError("seed list is empty");
    return out;
}

ScenarioConfig parse_scenario(const std::string& text, const std::string& origin)
{
    ScenarioConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    try {
        cfg.world.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path)
{
    return parse_scenario(read_file(path), path.string());
}

std::string fingerprint(const ScenarioConfig& cfg)
{
    std::string out;
    for (const auto& [k, s] : settings()) {
        if (s.plumbing) continue;
        out += k + "=" + s.get(cfg) + ";";
    }
    return out;
}

std::vector<RunResult> run_scenario(const ScenarioConfig& cfg)
{
    cfg.world.validate();
    if (cfg.seeds.empty()) throw ConfigError("seed list is empty");
    const std::string fp = fingerprint(cfg);
    std::vector<RunResult> results(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) return;
            try {
                sim::WorldConfig wc = cfg.world;
                wc.seed = cfg.seeds[i];
                sim::World world(wc);
                const auto& log = world.run();
                RunResult r;
                r.seed = wc.seed;
                r.fingerprint = fp;
                r.summary = metrics::summarize(log, wc.seed);
                if (cfg.keep_logs) r.log = log;
                results[i] = std::move(r);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = cfg.seeds.size();
                return;
            }
        }
    };

    const std::size_t n = std::clamp<std::size_t>(cfg.workers, 1, cfg.seeds.size());
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n; ++k) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

Stats describe(std::vector<double> values)
{
    Stats s;
    s.count = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        if (frac == 0.0) return values[lo];
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    s.min = values.front();
    s.max = values.back();
    s.q1 = q(0.25);
    s.median = q(0.5);
    s.q3 = q(0.75);
    double sum = 0;
    for (double v : values) sum += v;
    s.avg = sum / static_cast<double>(values.size());
    return s;
}

Aggregate aggregate(std::span<const RunResult> runs)
{
    if (runs.empty()) throw ConfigError("aggregate: no runs");
    for (const auto& r : runs)
        if (r.fingerprint != runs.front().fingerprint)
            throw ConfigError("aggregate: runs come from different configurations");
    Aggregate a;
    a.runs = runs.size();
    double time = 0, peer_time = 0;
    std::size_t alarms = 0, quiet = 0, irrecoverable = 0;
    std::vector<double> interalarm, first, dmg, maxf, avgf, finalf, interpoll, ipalarm;
    for (const auto& r : runs) {
        const auto& s = r.summary;
        time += s.end_time;
        peer_time += s.end_time * static_cast<double>(s.loyal_peers);
        alarms += s.alarms;
        if (s.alarms == 0) ++quiet;
        if (s.irrecoverable) ++irrecoverable;
        if (s.alarms > 0) interalarm.push_back(s.system_interalarm / kDay);
        if (s.first_alarm) first.push_back(*s.first_alarm / kDay);
        dmg.push_back(s.max_damaged_loyal_fraction);
        maxf.push_back(s.max_foothold);
        avgf.push_back(s.avg_foothold);
        finalf.push_back(s.final_foothold);
        interpoll.push_back(s.mean_interpoll_interval / kDay);
        if (s.median_first_interpoll_alarm) ipalarm.push_back(*s.median_first_interpoll_alarm / kDay);
    }
    const double n = static_cast<double>(runs.size());
    a.no_alarm_fraction = static_cast<double>(quiet) / n;
    a.irrecoverable_fraction = static_cast<double>(irrecoverable) / n;
    a.system_interalarm_days = alarms ? time / static_cast<double>(alarms) / kDay : kInf;
    a.per_peer_interalarm_years = alarms ? peer_time / static_cast<double>(alarms) / kYear : kInf;
    a.system_interalarm = describe(std::move(interalarm));
    a.first_alarm_days = describe(std::move(first));
    a.max_damaged_loyal = describe(std::move(dmg));
    a.max_foothold = describe(std::move(maxf));
    a.avg_foothold = describe(std::move(avgf));
    a.final_foothold = describe(std::move(finalf));
    a.mean_interpoll_days = describe(std::move(interpoll));
    a.median_first_interpoll_alarm_days = describe(std::move(ipalarm));
    return a;
}

std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

double parse_number(const std::string& s)
{
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (s.empty() || ec != std::errc() || p != end) throw ConfigError("not a number: '" + s + "'");
    return v;
}

std::size_t Table::column(const std::string& name) const
{
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("table has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

Table summary_table(std::span<const RunResult> runs)
{
    Table t;
    t.header = {"seed", "alarms", "first_alarm_days", "system_interalarm_days", "per_peer_interalarm_years",
                "max_damaged_loyal", "max_bad_fraction", "max_foothold", "avg_foothold", "final_foothold",
                "irrecoverable", "mean_interpoll_days", "median_first_interpoll_alarm_days", "polls",
                "inconclusive", "attacked_polls", "end_years"};
    for (const auto& r : runs) {
        const auto& s = r.summary;
        t.rows.push_back({std::to_string(r.seed), std::to_string(s.alarms),
                          format_number(s.first_alarm ? *s.first_alarm / kDay : kInf),
                          format_number(s.system_interalarm / kDay), format_number(s.per_peer_interalarm / kYear),
                          format_number(s.max_damaged_loyal_fraction), format_number(s.max_bad_fraction),
                          format_number(s.max_foothold), format_number(s.avg_foothold),
                          format_number(s.final_foothold), s.irrecoverable ? "1" : "0",
                          format_number(s.mean_interpoll_interval / kDay),
                          format_number(s.median_first_interpoll_alarm ? *s.median_first_interpoll_alarm / kDay : kInf),
                          std::to_string(s.polls), std::to_string(s.inconclusive), std::to_string(s.attacked_polls),
                          format_number(s.end_time / kYear)});
    }
    return t;
}

namespace {

const std::vector<std::pair<std::string, Stats Aggregate::*>>& stat_columns()
{
    static const std::vector<std::pair<std::string, Stats Aggregate::*>> cols{
        {"run_interalarm_days", &Aggregate::system_interalarm},
        {"first_alarm_days", &Aggregate::first_alarm_days},
        {"max_damaged_loyal", &Aggregate::max_damaged_loyal},
        {"max_foothold", &Aggregate::max_foothold},
        {"avg_foothold", &Aggregate::avg_foothold},
        {"final_foothold", &Aggregate::final_foothold},
        {"mean_interpoll_days", &Aggregate::mean_interpoll_days},
        {"median_first_interpoll_alarm_days", &Aggregate::median_first_interpoll_alarm_days},
    };
    return cols;
}

}  // namespace

Table aggregate_table(const std::string& param, std::span<const std::string> values,
                      std::span<const Aggregate> aggregates)
{
    if (values.size() != aggregates.size()) throw ConfigError("aggregate table: value and result counts differ");
    Table t;
    t.header = {param, "runs", "no_alarm_fraction", "irrecoverable_fraction", "system_interalarm_days",
                "per_peer_interalarm_years"};
    for (const auto& [name, field] : stat_columns())
        for (const char* suffix : {"_n", "_min", "_q1", "_median", "_q3", "_max", "_avg"})
            t.header.push_back(name + suffix);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& a = aggregates[i];
        std::vector<std::string> row{values[i], std::to_string(a.runs), format_number(a.no_alarm_fraction),
                                     format_number(a.irrecoverable_fraction), format_number(a.system_interalarm_days),
                                     format_number(a.per_peer_interalarm_years)};
        for (const auto& [name, field] : stat_columns()) {
            const Stats& s = a.*field;
            row.push_back(std::to_string(s.count));
            for (double v : {s.min, s.q1, s.median, s.q3, s.max, s.avg})
                row.push_back(s.count ? format_number(v) : "nan");
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace {

std::string csv_cell(const std::string& c)
{
    if (c.find_first_of(",\"\n\r") == std::string::npos) return c;
    std::string out = "\"";
    for (char ch : c) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string to_csv(const Table& t)
{
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += csv_cell(cells[i]);
        }
        out += '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out;
}

Table from_csv(const std::string& text)
{
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string cell;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            rec.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !cell.empty()) {
                rec.push_back(std::move(cell));
                records.push_back(std::move(rec));
            }
            rec.clear();
            cell.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (quoted) throw ConfigError("csv: unterminated quoted cell");
    if (any || !cell.empty()) {
        rec.push_back(std::move(cell));
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw ConfigError("csv: no header row");
    Table t;
    t.header = std::move(records.front());
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != t.header.size())
            throw ConfigError("csv: row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                              " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(records[i]));
    }
    return t;
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- SVG

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string xml_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

bool numeric(const std::string& s)
{
    try {
        parse_number(s);
        return true;
    } catch (const ConfigError&) {
        return false;
    }
}

double nice_step(double span)
{
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

struct Axis {
    double lo = 0, hi = 1;
    void cover(double v)
    {
        if (!std::isfinite(v)) return;
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void finish()
    {
        if (first) lo = 0, hi = 1;
        if (hi == lo) {
            const double pad = lo == 0 ? 1.0 : std::abs(lo) * 0.1;
            lo -= pad;
            hi += pad;
        }
        step = nice_step(hi - lo);
        lo = std::floor(lo / step) * step;
        hi = std::ceil(hi / step) * step;
    }
    double step = 1;
    bool first = true;
};

}  // namespace

ChartSpec infer_chart(const Table& t, const std::string& title)
{
    if (t.header.empty()) throw ConfigError("plot: table has no columns");
    ChartSpec spec;
    spec.title = title;
    spec.x_column = t.header.front();
    spec.x_label = t.header.front();
    auto has = [&](const std::string& c) { return std::find(t.header.begin(), t.header.end(), c) != t.header.end(); };
    std::vector<std::string> quart, bars;
    for (const auto& h : t.header) {
        const std::string suffix = "_median";
        if (h.size() > suffix.size() && h.ends_with(suffix)) {
            const std::string stem = h.substr(0, h.size() - suffix.size());
            if (has(stem + "_min") && has(stem + "_q1") && has(stem + "_q3") && has(stem + "_max"))
                quart.push_back(stem);
        }
        if (h.size() > 4 && h.ends_with("_avg")) {
            const std::string stem = h.substr(0, h.size() - 4);
            if (has(stem + "_min") && has(stem + "_max")) bars.push_back(stem);
        }
    }
    if (!quart.empty()) {
        spec.style = ChartStyle::Quartiles;
        spec.series = {quart.front()};
    } else if (!bars.empty()) {
        spec.style = ChartStyle::ErrorBars;
        spec.series = {bars.front()};
    } else {
        spec.style = ChartStyle::Line;
        for (std::size_t c = 1; c < t.header.size(); ++c) {
            bool all = !t.rows.empty();
            for (const auto& r : t.rows) all = all && numeric(r[c]);
            if (all) spec.series.push_back(t.header[c]);
        }
    }
    if (spec.series.empty()) throw ConfigError("plot: no numeric columns to draw");
    spec.y_label = spec.series.size() == 1 ? spec.series.front() : "value";
    return spec;
}

std::string render_svg(const Table& t, const ChartSpec& spec)
{
    const std::size_t xc = t.column(spec.x_column);
    bool x_numeric = !t.rows.empty();
    for (const auto& r : t.rows) x_numeric = x_numeric && numeric(r[xc]) && std::isfinite(parse_number(r[xc]));
    std::vector<double> xs;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        xs.push_back(x_numeric ? parse_number(t.rows[i][xc]) : static_cast<double>(i));

    auto cell = [&](std::size_t row, const std::string& col) { return parse_number(t.rows[row][t.column(col)]); };
    std::vector<std::string> needed;
    for (const auto& s : spec.series) {
        switch (spec.style) {
        case ChartStyle::Line: needed.push_back(s); break;
        case ChartStyle::ErrorBars:
            for (const char* sfx : {"_min", "_avg", "_max"}) needed.push_back(s + sfx);
            break;
        case ChartStyle::Quartiles:
            for (const char* sfx : {"_min", "_q1", "_median", "_q3", "_max"}) needed.push_back(s + sfx);
            break;
        }
    }
    Axis ax, ay;
    for (double x : xs) ax.cover(x);
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (const auto& c : needed) ay.cover(cell(i, c));
    ax.finish();
    ay.finish();
    if (!x_numeric) {
        ax.lo = -0.5;
        ax.hi = static_cast<double>(std::max<std::size_t>(t.rows.size(), 1)) - 0.5;
        ax.step = 1;
    }

    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - ay.lo) / (ay.hi - ay.lo) * ph; };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
      << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(kHeight) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(spec.title) << "</text>\n";

    // axes and ticks
    o << "<g stroke=\"#000\" stroke-width=\"1\">\n"
      << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(kLeft + pw) << "\" y2=\""
      << fmt(kTop + ph) << "\"/>\n"
      << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
      << fmt(kTop + ph) << "\"/>\n</g>\n";
    o << "<g font-size=\"11\">\n";
    for (int k = 0;; ++k) {
        const double y = ay.lo + k * ay.step;
        if (y > ay.hi + ay.step * 1e-9) break;
        o << "<line x1=\"" << fmt(kLeft - 4) << "\" y1=\"" << fmt(py(y)) << "\" x2=\"" << fmt(kLeft + pw) << "\" y2=\""
          << fmt(py(y)) << "\" stroke=\"#ddd\"/>\n"
          << "<text x=\"" << fmt(kLeft - 7) << "\" y=\"" << fmt(py(y) + 4) << "\" text-anchor=\"end\">" << label(y)
          << "</text>\n";
    }
    if (x_numeric) {
        for (int k = 0;; ++k) {
            const double x = ax.lo + k * ax.step;
            if (x > ax.hi + ax.step * 1e-9) break;
            o << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(px(x)) << "\" y2=\""
              << fmt(kTop + ph + 4) << "\" stroke=\"#000\"/>\n"
              << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(kTop + ph + 17) << "\" text-anchor=\"middle\">"
              << label(x) << "</text>\n";
        }
    } else {
        for (std::size_t i = 0; i < t.rows.size(); ++i)
            o << "<text x=\"" << fmt(px(xs[i])) << "\" y=\"" << fmt(kTop + ph + 17) << "\" text-anchor=\"middle\">"
              << xml_escape(t.rows[i][xc]) << "</text>\n";
    }
    o << "</g>\n";
    o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 18) << "\" text-anchor=\"middle\">"
      << xml_escape(spec.x_label) << "</text>\n"
      << "<text transform=\"translate(18," << fmt(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << xml_escape(spec.y_label) << "</text>\n";

    for (std::size_t si = 0; si < spec.series.size(); ++si) {
        const std::string& s = spec.series[si];
        const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
        const double offset = spec.series.size() > 1 && spec.style != ChartStyle::Line
                                  ? (static_cast<double>(si) - 0.5 * static_cast<double>(spec.series.size() - 1)) * 6.0
                                  : 0.0;
        o << "<g stroke=\"" << color << "\" fill=\"" << color << "\">\n";
        const std::string center = spec.style == ChartStyle::Line        ? s
                                   : spec.style == ChartStyle::ErrorBars ? s + "_avg"
                                                                         : s + "_median";
        std::string points;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const double y = cell(i, center);
            if (!std::isfinite(y)) continue;
            points += (points.empty() ? "" : " ") + fmt(px(xs[i]) + offset) + "," + fmt(py(y));
        }
        if (spec.style != ChartStyle::Quartiles && !points.empty())
            o << "<polyline fill=\"none\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            const double x = px(xs[i]) + offset;
            if (spec.style == ChartStyle::ErrorBars) {
                const double lo = cell(i, s + "_min"), hi = cell(i, s + "_max");
                if (std::isfinite(lo) && std::isfinite(hi)) {
                    o << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(py(lo)) << "\" x2=\"" << fmt(x) << "\" y2=\""
                      << fmt(py(hi)) << "\"/>\n";
                    for (double v : {lo, hi})
                        o << "<line x1=\"" << fmt(x - 4) << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << fmt(x + 4)
                          << "\" y2=\"" << fmt(py(v)) << "\"/>\n";
                }
            } else if (spec.style == ChartStyle::Quartiles) {
                const double mn = cell(i, s + "_min"), q1 = cell(i, s + "_q1"), md = cell(i, s + "_median"),
                             q3 = cell(i, s + "_q3"), mx = cell(i, s + "_max");
                if (!(std::isfinite(mn) && std::isfinite(mx))) continue;
                o << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(py(mn)) << "\" x2=\"" << fmt(x) << "\" y2=\""
                  << fmt(py(mx)) << "\" stroke-width=\"1\"/>\n"
                  << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(py(q1)) << "\" x2=\"" << fmt(x) << "\" y2=\""
                  << fmt(py(q3)) << "\" stroke-width=\"4\"/>\n";
                for (double v : {mn, q1, q3, mx})
                    o << "<line x1=\"" << fmt(x - 3) << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << fmt(x + 3)
                      << "\" y2=\"" << fmt(py(v)) << "\" stroke-width=\"1\"/>\n";
                o << "<line x1=\"" << fmt(x - 7) << "\" y1=\"" << fmt(py(md)) << "\" x2=\"" << fmt(x + 7)
                  << "\" y2=\"" << fmt(py(md)) << "\" stroke-width=\"2\"/>\n";
                continue;
            }
            const double y = cell(i, center);
            if (std::isfinite(y)) o << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(py(y)) << "\" r=\"2.5\"/>\n";
        }
        o << "</g>\n";
        const double ly = kTop + 14 + 18 * static_cast<double>(si);
        o << "<rect x=\"" << fmt(kLeft + pw + 16) << "\" y=\"" << fmt(ly - 9) << "\" width=\"12\" height=\"10\" fill=\""
          << color << "\"/>\n"
          << "<text x=\"" << fmt(kLeft + pw + 32) << "\" y=\"" << fmt(ly) << "\" font-size=\"11\">" << xml_escape(s)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace lockss::experiments
