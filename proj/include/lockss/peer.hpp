#pragma once

// Event-driven loyal peer: poll initiator and voter in one state machine.
// The peer never touches the clock or the network directly; it talks to an
// Environment, which the simulation engine implements.

#include "lockss/effort.hpp"
#include "lockss/protocol.hpp"

#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace lockss::protocol {

struct PollMsg {
    PollId poll;
    Digest dh_key{};
};
struct PollChallengeMsg {
    PollId poll;
    Digest dh_key{};
    Digest challenge{};
    bool yes = false;
};
struct PollProofMsg {
    PollId poll;
    Digest proof{};
};
struct NominateMsg {
    PollId poll;
    std::vector<PeerId> nominations;
};
struct VoteMsg {
    PollId poll;
    effort::Vote vote;
};
struct RepairRequestMsg {
    PollId poll;
};
struct RepairMsg {
    PollId poll;
    AuVersion au;
};

using PollMessage =
    std::variant<PollMsg, PollChallengeMsg, PollProofMsg, NominateMsg, VoteMsg, RepairRequestMsg, RepairMsg>;

const char* message_name(const PollMessage& m);

enum class TimerKind : std::uint8_t { Refresh, Challenge, Nomination, Vote, Repair, Effort, InterPoll };

struct TimerTag {
    TimerKind kind = TimerKind::Refresh;
    PollId poll;
    std::uint64_t generation = 0;
};

enum class ComputeKind : std::uint8_t { PollProof, VerifyPollProof, ConstructVote, VerifyVotes, VerifyRepair };

struct ComputeTag {
    ComputeKind kind = ComputeKind::PollProof;
    PollId poll;
    std::uint64_t arg = 0;
};

// Derived protocol timeouts, in seconds.
struct Timing {
    SimTime challenge = 5.0;
    SimTime effort = 80000.0;
    SimTime nomination = 1000.0;
    SimTime vote = 4000.0;
    SimTime repair = 600.0;
};

struct PeerConfig {
    ProtocolParams protocol;
    effort::EffortParams effort;
    effort::CostTable costs;
    Timing timing;
    std::uint32_t vote_rounds = 0;
};

struct PollOutcome {
    PeerId initiator;
    PollId poll;
    SimTime started = 0;
    SimTime finished = 0;
    Tally tally = Tally::NoQuorum;
    bool aborted = false;
    bool repaired = false;
    std::size_t valid_votes = 0;
    std::size_t agreeing = 0;
    std::size_t removed = 0;
    AuVersion au_before;
    AuVersion au_after;
};

class Environment {
public:
    virtual ~Environment() = default;
    virtual SimTime now() const = 0;
    virtual void send(PeerId from, PeerId to, PollMessage msg) = 0;
    // Queues work on the peer's serial CPU; returns the completion time.
    virtual SimTime start_compute(PeerId who, double cost_units, ComputeTag tag) = 0;
    virtual void set_timer(PeerId who, SimTime at, TimerTag tag) = 0;
    virtual void raise_alarm(const Alarm& alarm) = 0;
    virtual void poll_concluded(const PollOutcome& outcome) = 0;
    virtual void reference_list_changed(PeerId who) = 0;
    virtual void au_changed(PeerId who, AuVersion before, AuVersion after) = 0;
    virtual const effort::AuContent& content(const AuVersion& au) = 0;
};

enum class InviteeStatus : std::uint8_t { Pending, Affirmative, Negative, Discredited, NoResponse };

struct Invitee {
    PeerId peer;
    bool outer = false;
    InviteeStatus status = InviteeStatus::Pending;
    Digest challenge{};
    bool proof_sent = false;
    bool nominated = false;
    std::vector<PeerId> nominations;
    std::optional<effort::Vote> vote;
    effort::Verdict verdict = effort::Verdict::Invalid;
    bool ever_agreed = false;
};

enum class Phase : std::uint8_t {
    AwaitingChallenges,
    ComputingProofs,
    AwaitingNominations,
    OuterChallenges,
    OuterProofs,
    AwaitingVotes,
    Tabulating,
    Repairing,
    Concluded,
    Alarmed
};

struct PollRecord {
    PollId id;
    Phase phase = Phase::AwaitingChallenges;
    SimTime started = 0;
    std::vector<Invitee> invitees;
    std::size_t discredit_count = 0;
    std::size_t repair_attempts = 0;  // repairs received; silent voters don't count
    std::size_t repair_requests = 0;
    std::uint64_t round = 0;  // invalidates stale challenge timers
    std::size_t pending = 0;  // challenges outstanding in the current round
    std::vector<std::size_t> proof_queue;
    std::vector<std::size_t> repair_candidates;
    std::optional<std::size_t> repair_supplier;
    std::optional<AuVersion> offered_repair;
    AuVersion au_at_start;
    bool repaired = false;

    Invitee* find(PeerId p);
    std::size_t count(InviteeStatus s, bool outer) const;
};

// Tallies the inner circle against the current verdicts.
struct InnerTally {
    std::size_t valid = 0;
    std::size_t agreeing = 0;
    std::size_t ever_agreed = 0;
};
InnerTally tally_inner(const PollRecord& poll);

class LoyalPeer {
public:
    LoyalPeer(PeerId id, std::vector<PeerId> friends, std::shared_ptr<const PeerConfig> config, Rng rng);

    const PeerState& state() const { return state_; }
    PeerState& mutable_state() { return state_; }
    const PollRecord* current_poll() const { return poll_ ? &*poll_ : nullptr; }

    // Bootstraps the reference list and arms the first refresh timer.
    void start(Environment& env);

    void on_message(Environment& env, PeerId from, PollMessage msg);
    void on_timer(Environment& env, const TimerTag& tag);
    void on_compute(Environment& env, const ComputeTag& tag);

    // Undetected damage: silently replace the replica.
    void damage(Environment& env, AuVersion replacement);

private:
    struct Voting {
        PeerId initiator;
        PollId poll;
        Digest challenge{};
        Digest proof{};
        bool proof_received = false;
    };
    struct Declined {
        PeerId initiator;
        PollId poll;
        SimTime expires = 0;
    };

    // initiator side
    void call_poll(Environment& env);
    void invite(Environment& env, const std::vector<PeerId>& peers, bool outer);
    void on_challenge(Environment& env, PeerId from, const PollChallengeMsg& m);
    void process_challenges(Environment& env, bool outer);
    void start_next_proof(Environment& env);
    void proofs_done(Environment& env);
    void on_nominate(Environment& env, PeerId from, NominateMsg m);
    void form_outer(Environment& env);
    void on_vote(Environment& env, PeerId from, VoteMsg m);
    void maybe_all_votes(Environment& env);
    void begin_verification(Environment& env);
    void votes_verified(Environment& env);
    void decide(Environment& env);
    void try_repair(Environment& env);
    void on_repair(Environment& env, PeerId from, RepairMsg m);
    void repair_verified(Environment& env);
    void abort_poll(Environment& env);
    void conclude(Environment& env, Tally tally, bool aborted);
    void schedule_refresh(Environment& env, SimTime at);
    void mark_quorate(Environment& env);
    std::vector<PeerId> agreeing_voters(bool include_outer) const;

    // voter side
    void on_invitation(Environment& env, PeerId from, const PollMsg& m);
    void on_proof(Environment& env, PeerId from, const PollProofMsg& m);
    void end_commitment(Environment& env);
    void on_repair_request(Environment& env, PeerId from, const RepairRequestMsg& m);

    PeerState state_;
    std::shared_ptr<const PeerConfig> cfg_;
    Rng rng_;
    std::optional<PollRecord> poll_;
    std::optional<Voting> voting_;
    std::vector<Declined> declined_;
    bool wants_poll_ = false;
    std::uint64_t refresh_generation_ = 0;
    std::uint64_t interpoll_generation_ = 0;
};

}  // namespace lockss::protocol
