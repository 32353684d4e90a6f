#pragma once

// Loyal-peer protocol data and the pure decision rules of a poll: invitee
// sampling, tabulation, outer-circle formation, reference-list maintenance,
// repair eligibility and alarms.

#include "lockss/core.hpp"
#include "lockss/effort.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lockss::protocol {

enum class AuKind : std::uint8_t { Good, Bad, RandomDamage, Bogus };

const char* to_string(AuKind k);

// Two versions agree iff their ids are equal.
struct AuVersion {
    std::uint64_t id = 0;
    AuKind kind = AuKind::Good;
    friend bool operator==(const AuVersion& a, const AuVersion& b) { return a.id == b.id; }
};

inline constexpr AuVersion kGoodAu{1, AuKind::Good};
inline constexpr AuVersion kBadAu{2, AuKind::Bad};

struct ProtocolParams {
    std::size_t inner_size = 20;      // N
    std::size_t quorum = 10;          // Q
    std::size_t max_minority = 3;     // D
    std::size_t max_discredited = 3;  // A
    std::size_t nominations = 10;     // I
    std::uint64_t max_entry_age = 4;  // E_age, in polls
    SimTime mean_interval = 3.0 * kMonth;  // R
    double churn = 0.10;              // C
    double ref_target_multiplier = 3.0;
    double interval_jitter = 0.2;     // refresh interval ~ U[(1-j)R, (1+j)R]
    SimTime abort_retry_delay = 6.0 * kHour;
    double interpoll_alarm_factor = 3.0;
    // Start as if friends had already voted agreeing in our past polls, so a
    // peer damaged early can still be repaired.
    bool prior_friend_history = true;
    // First refresh deadline drawn uniformly within the first interval, as in a
    // network already running; off gives every peer a full first interval.
    bool stagger_first_poll = true;
    // Ask for repairs only from disagreeing voters whose polls we voted in.
    bool known_repairers_only = true;

    void validate() const;
    std::size_t reference_target() const
    {
        return static_cast<std::size_t>(ref_target_multiplier * static_cast<double>(inner_size));
    }
};

struct ReferenceEntry {
    PeerId peer;
    std::uint64_t time_inserted = 0;
};

// Ordered set of entries keyed by peer. Never holds its owner.
class ReferenceList {
public:
    explicit ReferenceList(PeerId owner = {}) : owner_(owner) {}

    PeerId owner() const { return owner_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::span<const ReferenceEntry> entries() const { return entries_; }
    bool contains(PeerId p) const { return find(p) != nullptr; }
    const ReferenceEntry* find(PeerId p) const;

    // Inserts or, when present, re-stamps. Returns true when newly inserted.
    bool upsert(PeerId p, std::uint64_t stamp);
    bool insert(PeerId p, std::uint64_t stamp);
    bool erase(PeerId p);
    void clear() { entries_.clear(); }

    // Drops entries with counter - time_inserted >= max_age. Returns the count dropped.
    std::size_t drop_stale(std::uint64_t counter, std::uint64_t max_age);

private:
    PeerId owner_;
    std::vector<ReferenceEntry> entries_;
};

enum class Commitment : std::uint8_t { Idle, Polling, Voting };

struct HistoryEntry {
    PollId poll;
    std::uint64_t version_id = 0;
};

struct PeerState {
    PeerId id;
    AuVersion au = kGoodAu;
    ReferenceList reference_list;
    std::vector<PeerId> friends;
    std::uint64_t poll_counter = 0;
    SimTime refresh_deadline = 0;
    Commitment busy = Commitment::Idle;
    // Voters that agreed with us in polls we called, latest poll wins.
    std::unordered_map<PeerId, HistoryEntry> vote_history;
    // Initiators whose polls we voted in: the only peers we ask for repairs.
    std::unordered_set<PeerId> voted_in;
    SimTime last_quorate_poll_time = 0;
};

enum class AlarmKind : std::uint8_t { InconclusivePoll, LocalSpoofing, InterPollInterval };

const char* to_string(AlarmKind k);

struct Alarm {
    AlarmKind kind = AlarmKind::InconclusivePoll;
    PeerId peer;
    SimTime time = 0;
    std::optional<PollId> poll;
};

enum class Tally : std::uint8_t { LandslideWin, LandslideLoss, Inconclusive, NoQuorum };

const char* to_string(Tally t);

SimTime sample_interval(const ProtocolParams& params, Rng& rng);

// Copies the friends list into the reference list and arms the refresh timer.
void bootstrap(PeerState& peer, const ProtocolParams& params, SimTime now, Rng& rng);

// Uniform sample without replacement of up to `count` list members not in `exclude`.
std::vector<PeerId> choose_invitees(const ReferenceList& list, std::size_t count,
                                    const std::unordered_set<PeerId>& exclude, Rng& rng);

// Throws std::invalid_argument when agreeing > valid.
Tally tabulate(std::size_t valid, std::size_t agreeing, const ProtocolParams& params);

// Whether an invitee accepts: only when idle and not about to call its own poll.
bool accepts_invitation(const PeerState& voter, bool wants_own_poll, SimTime now);

// Nomination lists in nominator order. Each nominator contributes an equal
// share (floor, remainder spread by seeded shuffle) of fresh nominees; short
// lists are not backfilled.
std::vector<PeerId> form_outer_circle(std::span<const std::vector<PeerId>> nominations, const ReferenceList& list,
                                      const std::unordered_set<PeerId>& already_invited,
                                      const ProtocolParams& params, Rng& rng);

struct InnerVote {
    PeerId peer;
    effort::Verdict verdict = effort::Verdict::Invalid;
};

struct UpdateReport {
    std::size_t removed_disagreeing = 0;
    std::size_t removed_agreeing = 0;
    std::size_t refreshed = 0;
    std::size_t inserted_outer = 0;
    std::size_t churned = 0;
    std::size_t aged_out = 0;
    std::size_t removed() const { return removed_disagreeing + removed_agreeing; }
};

// Landslide-win maintenance. `inner` holds the valid inner votes against the
// final AU; `outer_agreeing` the outer voters that agreed with it.
UpdateReport update_reference_list(PeerState& peer, std::span<const InnerVote> inner,
                                   std::span<const PeerId> outer_agreeing, const ProtocolParams& params, Rng& rng);

// No-quorum maintenance: refresh or insert every agreeing voter of either circle.
UpdateReport update_reference_list_no_quorum(PeerState& peer, std::span<const PeerId> agreeing);

bool should_supply_repair(const PeerState& supplier, PeerId requester);

std::optional<Alarm> check_interpoll_alarm(const PeerState& peer, SimTime now, const ProtocolParams& params);

}  // namespace lockss::protocol
