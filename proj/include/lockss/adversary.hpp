#pragma once

// Shared-knowledge, multi-homed adversary: one pooled computer behind many
// network identities, following the stealth, nuisance or attrition strategy.

#include "lockss/netsim.hpp"
#include "lockss/peer.hpp"
#include "lockss/protocol.hpp"

#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lockss::adversary {

enum class Strategy : std::uint8_t { None, Stealth, Nuisance, Attrition };
enum class StealthPhase : std::uint8_t { Lurk, Attack };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

// M + L >= Q, M > L, L <= D.
bool stealth_vulnerable(std::size_t malign, std::size_t loyal, std::size_t quorum, std::size_t max_minority);
// M + L >= Q, L > D, M > D.
bool nuisance_vulnerable(std::size_t malign, std::size_t loyal, std::size_t quorum, std::size_t max_minority);

struct AdversaryConfig {
    Strategy strategy = Strategy::None;
    StealthPhase phase = StealthPhase::Lurk;
    double subversion = 0.0;                   // fraction of the population taken over at t = 0
    std::optional<std::size_t> subverted;      // absolute count, overrides the fraction
    std::size_t extra_cpus = 0;
    bool unlimited_cpus = false;
    std::optional<std::size_t> extra_nics;     // identities beyond the subverted peers; unset = auto
    double initial_foothold = 0.0;             // attack runs: Bernoulli share of malign entries
    bool exact_foothold = false;               // exactly round(f * size) malign entries per list instead
    bool stealth_polls = true;                 // subverted identities call polls at loyal cadence
    std::size_t attrition_cpus = 0;
    std::size_t attrition_poll_size = 40;      // affirmatives sought per attrition poll; 0 = N
    std::size_t attrition_topups = 5;          // extra invitation rounds per attrition poll

    void validate() const;
};

// The subversion count for a population.
std::size_t subverted_count(const AdversaryConfig& cfg, std::size_t population);

// Enough identities that a malign nominator always finds I fresh ones after
// the initiator drops its whole reference list and the poll's invitees.
std::size_t auto_nic_total(const protocol::ProtocolParams& p);
// Extra identities for stealth and nuisance runs; none for the other strategies.
std::size_t extra_nic_count(const AdversaryConfig& cfg, std::size_t subverted, const protocol::ProtocolParams& p);

struct InnerCount {
    std::size_t loyal = 0;
    std::size_t malign = 0;
};

// What the adversary's side of the engine offers it.
class AdversaryEnv {
public:
    virtual ~AdversaryEnv() = default;
    virtual SimTime now() const = 0;
    virtual void send(PeerId from, PeerId to, protocol::PollMessage msg) = 0;
    virtual const protocol::PeerConfig& peer_config() const = 0;
    virtual const effort::AuContent& content(const protocol::AuVersion& au) = 0;
    // Affirmative inner-circle invitees of a loyal initiator's running poll,
    // loyal and malign. Outer-circle invitees never count.
    virtual std::optional<InnerCount> inner_affirmatives(PeerId initiator, PollId poll) const = 0;
    virtual const protocol::ReferenceList* reference_list(PeerId peer) const = 0;
    virtual const std::vector<PeerId>& loyal_peers() const = 0;
    virtual PeerId fresh_identity() = 0;
    virtual protocol::AuVersion fresh_bogus_version() = 0;
    virtual void schedule_adversary(SimTime at, std::uint64_t token) = 0;
    virtual void attack_decided(PeerId initiator, PollId poll, std::size_t malign, std::size_t loyal,
                                const protocol::AuVersion& version, bool attacking) = 0;
};

struct PollDecision {
    std::size_t malign = 0;
    std::size_t loyal = 0;
    protocol::AuVersion version;
    bool attacking = false;
    std::vector<PeerId> nomination_pool;
};

// Per-poll knowledge pooled across all malign identities.
struct PollKnowledge {
    PeerId initiator;
    SimTime first_seen = 0;
    std::vector<PeerId> invited;                  // malign identities, in arrival order
    std::unordered_map<PeerId, Digest> challenges;
    std::unordered_set<PeerId> voted;
    std::optional<PollDecision> decision;
};

struct AdversaryState {
    AdversaryConfig config;
    std::vector<PeerId> nics;                     // subverted peers first, then extra identities
    std::unordered_set<PeerId> malign;            // every identity the adversary controls, incl. throwaways
    protocol::AuVersion good_au = protocol::kGoodAu;
    protocol::AuVersion bad_au = protocol::kBadAu;
    std::unordered_map<PollId, PollKnowledge> per_poll;
    std::unordered_set<PeerId> repair_clients;    // loyal peers that voted in malign polls
    std::size_t polls_called = 0;
    std::size_t polls_attacked = 0;
    std::size_t votes_cast = 0;
};

class Adversary {
public:
    Adversary(AdversaryConfig config, std::vector<PeerId> subverted, std::vector<PeerId> extra_nics, Rng rng);

    const AdversaryState& state() const { return state_; }
    bool controls(PeerId p) const { return state_.malign.contains(p); }
    const netsim::CpuPool& pool() const { return pool_; }
    SimTime attrition_busy() const;

    void start(AdversaryEnv& env);
    void on_message(AdversaryEnv& env, PeerId to, PeerId from, protocol::PollMessage msg);
    void on_wakeup(AdversaryEnv& env, std::uint64_t token);

private:
    enum class JobKind : std::uint8_t { Vote, StealthPoll, StealthProof, AttritionStep, AttritionProof };
    struct Job {
        JobKind kind;
        PeerId nic;
        PollId poll;
        PeerId target;
        std::size_t worker = 0;
    };

    // An attrition CPU running one throw-away poll at a time.
    struct AttritionWorker {
        netsim::SerialCpu cpu;
        PeerId identity;
        PollId poll;
        std::vector<PeerId> invited;
        std::vector<std::pair<PeerId, Digest>> affirmative;
        std::size_t next_proof = 0;
        std::size_t rounds = 0;
        std::uint64_t epoch = 0;
        bool collecting = false;
    };

    struct OwnPoll {
        PeerId identity;
        std::unordered_map<PeerId, Digest> challenges;
    };

    // malign voter behaviour
    void on_invite(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::PollMsg& m);
    void on_proof(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::PollProofMsg& m);
    void decide(AdversaryEnv& env, PollKnowledge& k, PollId poll);
    void cast_vote(AdversaryEnv& env, const Job& job);
    void on_repair_request(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::RepairRequestMsg& m);

    // malign initiator behaviour
    void stealth_poll(AdversaryEnv& env, PeerId identity);
    void attrition_begin(AdversaryEnv& env, std::size_t w);
    void attrition_invite(AdversaryEnv& env, std::size_t w, std::size_t count);
    void attrition_step(AdversaryEnv& env, std::size_t w, std::uint64_t epoch);
    void on_challenge(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::PollChallengeMsg& m);
    void on_vote(PeerId nic, PeerId from, const protocol::VoteMsg& m);

    std::uint64_t enqueue(Job job);
    std::vector<PeerId> sample_loyal(AdversaryEnv& env, std::size_t count, const std::vector<PeerId>& exclude);
    void expire_knowledge(SimTime now);

    AdversaryState state_;
    Rng rng_;
    netsim::CpuPool pool_;
    std::unordered_map<std::uint64_t, Job> jobs_;
    std::uint64_t next_token_ = 1;
    std::deque<std::pair<SimTime, PollId>> knowledge_order_;
    std::size_t subverted_ = 0;
    std::unordered_map<PollId, OwnPoll> own_polls_;
    std::vector<AttritionWorker> workers_;
    std::unordered_map<PollId, std::size_t> attrition_polls_;
};

}  // namespace lockss::adversary
