#pragma once

// Per-run measurement records and the scalar summary derived from them.

#include "lockss/protocol.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace lockss::metrics {

struct AlarmRecord {
    SimTime time = 0;
    protocol::AlarmKind kind = protocol::AlarmKind::InconclusivePoll;
    PeerId peer;
};

struct PollRecordLog {
    SimTime time = 0;
    PeerId initiator;
    protocol::Tally tally = protocol::Tally::NoQuorum;
    std::uint16_t valid = 0;
    std::uint16_t agreeing = 0;
    bool repaired = false;
    bool aborted = false;
};

// Replica census over the configured population. Malign counts subverted
// peers only; extra adversary identities hold no replica.
struct Census {
    std::size_t good = 0;
    std::size_t bad = 0;
    std::size_t damaged = 0;
    std::size_t malign = 0;
    std::size_t total() const { return good + bad + damaged + malign; }
};

struct Snapshot {
    SimTime time = 0;
    double foothold = 0;
    Census census;
};

struct AttackRecord {
    SimTime time = 0;
    PeerId initiator;
    PollId poll;
    std::size_t malign = 0;
    std::size_t loyal = 0;
    bool attacking = false;
    std::optional<protocol::Tally> outcome;
};

struct MetricsLog {
    std::vector<AlarmRecord> alarms;
    std::vector<PollRecordLog> polls;
    std::vector<Snapshot> snapshots;
    std::vector<AttackRecord> attacks;

    std::uint64_t events = 0;
    std::uint64_t polls_concluded = 0;
    std::uint64_t quorate_polls = 0;
    std::uint64_t wins = 0;
    std::uint64_t losses = 0;
    std::uint64_t inconclusive = 0;
    std::uint64_t no_quorum = 0;
    std::uint64_t aborted = 0;
    std::uint64_t repairs = 0;
    std::uint64_t damage_events = 0;
    std::uint64_t bad_adoptions = 0;
    double adversary_effort_seconds = 0;

    double max_foothold = 0;
    SimTime max_foothold_time = 0;
    double final_foothold = 0;
    // Largest share of the population holding a non-good replica at a loyal peer.
    double max_damaged_loyal_fraction = 0;
    SimTime max_damaged_loyal_time = 0;
    double max_bad_fraction = 0;  // malign plus bad-or-damaged loyal, over the population
    bool irrecoverable = false;
    std::optional<SimTime> irrecoverable_time;
    std::optional<SimTime> stopped_at;
    SimTime end_time = 0;
    std::size_t loyal_peers = 0;
    std::size_t population = 0;
    std::size_t subverted = 0;

    // Loyal peers that raised at least one inter-poll alarm, with the first time.
    std::vector<SimTime> first_interpoll_alarm;
};

struct RunSummary {
    std::uint64_t seed = 0;
    std::size_t loyal_peers = 0;
    std::optional<SimTime> first_alarm;
    std::optional<SimTime> first_inconclusive_alarm;
    std::size_t alarms = 0;
    double max_bad_fraction = 0;
    double max_damaged_loyal_fraction = 0;
    SimTime max_damaged_loyal_time = 0;
    double max_foothold = 0;
    double avg_foothold = 0;  // time-averaged over snapshots
    double final_foothold = 0;
    bool irrecoverable = false;
    double mean_interpoll_interval = 0;  // loyal peer-time per quorate poll
    // Mean time between alarms, system-wide and per peer; infinite without alarms.
    double system_interalarm = 0;
    double per_peer_interalarm = 0;
    std::size_t interpoll_alarm_peers = 0;
    std::optional<SimTime> median_first_interpoll_alarm;
    std::uint64_t polls = 0;
    std::uint64_t inconclusive = 0;
    std::uint64_t attacked_polls = 0;
    SimTime end_time = 0;
};

RunSummary summarize(const MetricsLog& log, std::uint64_t seed);

// First time the population-average foothold reached `level`, if ever.
std::optional<SimTime> first_time_foothold(const MetricsLog& log, double level);

}  // namespace lockss::metrics
