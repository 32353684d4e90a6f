#include "lockss/metrics.hpp"

#include <algorithm>
#include <limits>

namespace lockss::metrics {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

RunSummary summarize(const MetricsLog& log, std::uint64_t seed)
{
    RunSummary s;
    s.seed = seed;
    s.loyal_peers = log.loyal_peers;
    s.alarms = log.alarms.size();
    if (!log.alarms.empty()) s.first_alarm = log.alarms.front().time;
    for (const auto& a : log.alarms) {
        if (a.kind == protocol::AlarmKind::InconclusivePoll) {
            s.first_inconclusive_alarm = a.time;
            break;
        }
    }
    s.max_bad_fraction = log.max_bad_fraction;
    s.max_damaged_loyal_fraction = log.max_damaged_loyal_fraction;
    s.max_damaged_loyal_time = log.max_damaged_loyal_time;
    s.max_foothold = log.max_foothold;
    s.final_foothold = log.final_foothold;
    s.irrecoverable = log.irrecoverable;
    s.end_time = log.end_time;
    s.polls = log.polls_concluded;
    s.inconclusive = log.inconclusive;
    s.attacked_polls = static_cast<std::uint64_t>(
        std::count_if(log.attacks.begin(), log.attacks.end(), [](const AttackRecord& a) { return a.attacking; }));

    const double loyal = static_cast<double>(log.loyal_peers);
    s.mean_interpoll_interval = log.quorate_polls ? log.end_time * loyal / static_cast<double>(log.quorate_polls) : kInf;
    s.system_interalarm = s.alarms ? log.end_time / static_cast<double>(s.alarms) : kInf;
    s.per_peer_interalarm = s.system_interalarm * loyal;

    if (log.snapshots.size() >= 2) {
        double area = 0;
        for (std::size_t k = 1; k < log.snapshots.size(); ++k)
            area += log.snapshots[k - 1].foothold * (log.snapshots[k].time - log.snapshots[k - 1].time);
        const double span = log.snapshots.back().time - log.snapshots.front().time;
        s.avg_foothold = span > 0 ? area / span : log.snapshots.back().foothold;
    } else if (!log.snapshots.empty()) {
        s.avg_foothold = log.snapshots.front().foothold;
    }

    s.interpoll_alarm_peers = log.first_interpoll_alarm.size();
    if (log.loyal_peers > 0) {
        std::vector<double> times(log.first_interpoll_alarm.begin(), log.first_interpoll_alarm.end());
        times.resize(log.loyal_peers, kInf);
        std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
        const double med = times[times.size() / 2];
        if (med < kInf) s.median_first_interpoll_alarm = med;
    }
    return s;
}

std::optional<SimTime> first_time_foothold(const MetricsLog& log, double level)
{
    for (const auto& snap : log.snapshots)
        if (snap.foothold >= level) return snap.time;
    return std::nullopt;
}

}  // namespace lockss::metrics
