#pragma once

// One simulation run: population, links, loyal peers, the adversary and the
// event loop that drives them.

#include "lockss/adversary.hpp"
#include "lockss/metrics.hpp"
#include "lockss/netsim.hpp"
#include "lockss/peer.hpp"

#include <memory>
#include <unordered_map>
#include <variant>
#include <vector>

namespace lockss::sim {

struct WorldConfig {
    std::size_t peers = 1000;
    std::size_t cluster_size = 30;
    double intra_cluster_fraction = 0.80;
    std::size_t friends = 29;
    protocol::ProtocolParams protocol;
    effort::EffortParams effort;
    netsim::NetParams net;
    double damage_mtbf = netsim::kInfinity;  // seconds
    SimTime horizon = 10.0 * kYear;
    bool stop_on_alarm = false;
    std::vector<protocol::AlarmKind> stop_kinds;  // empty: any alarm stops
    adversary::AdversaryConfig adversary;
    bool record_polls = false;
    SimTime snapshot_spacing = 0;  // 0: after every change
    std::uint64_t seed = 1;

    void validate() const;
};

struct Population {
    std::vector<std::vector<PeerId>> friends;
    std::vector<std::size_t> cluster;
    std::size_t clusters = 0;
};

// Clusters of `cluster_size` (the remainder forms a short last cluster). Each
// peer gets round(fraction * friends) friends from its own cluster, the rest
// from elsewhere; a short cluster falls back to outside peers.
Population build_population(std::size_t peers, std::size_t cluster_size, double intra_fraction,
                            std::size_t friends, Rng& rng);

protocol::Timing derive_timing(const protocol::ProtocolParams& p, const effort::EffortParams& e,
                               const netsim::NetParams& n);

std::shared_ptr<const protocol::PeerConfig> make_peer_config(const WorldConfig& cfg);

class World final : public protocol::Environment, public adversary::AdversaryEnv {
public:
    explicit World(WorldConfig config);
    ~World() override;

    // Runs to the horizon or to the first qualifying alarm.
    const metrics::MetricsLog& run();

    const metrics::MetricsLog& log() const { return log_; }
    const WorldConfig& config() const { return cfg_; }
    const protocol::LoyalPeer* peer(PeerId id) const;
    const adversary::Adversary* adversary() const { return adversary_.get(); }
    bool is_malign(PeerId id) const;
    metrics::Census census() const { return census_; }
    double average_foothold() const;
    std::size_t node_count() const { return links_.size(); }

    // protocol::Environment and adversary::AdversaryEnv
    SimTime now() const override { return queue_.now(); }
    void send(PeerId from, PeerId to, protocol::PollMessage msg) override;
    SimTime start_compute(PeerId who, double cost_units, protocol::ComputeTag tag) override;
    void set_timer(PeerId who, SimTime at, protocol::TimerTag tag) override;
    void raise_alarm(const protocol::Alarm& alarm) override;
    void poll_concluded(const protocol::PollOutcome& outcome) override;
    void reference_list_changed(PeerId who) override;
    void au_changed(PeerId who, protocol::AuVersion before, protocol::AuVersion after) override;
    const effort::AuContent& content(const protocol::AuVersion& au) override;

    const protocol::PeerConfig& peer_config() const override { return *peer_cfg_; }
    std::optional<adversary::InnerCount> inner_affirmatives(PeerId initiator, PollId poll) const override;
    const protocol::ReferenceList* reference_list(PeerId peer) const override;
    const std::vector<PeerId>& loyal_peers() const override { return loyal_ids_; }
    PeerId fresh_identity() override;
    protocol::AuVersion fresh_bogus_version() override;
    void schedule_adversary(SimTime at, std::uint64_t token) override;
    void attack_decided(PeerId initiator, PollId poll, std::size_t malign, std::size_t loyal,
                        const protocol::AuVersion& version, bool attacking) override;

private:
    struct Deliver {
        PeerId from, to;
        protocol::PollMessage msg;
    };
    struct PeerTimer {
        PeerId who;
        protocol::TimerTag tag;
    };
    struct PeerCompute {
        PeerId who;
        protocol::ComputeTag tag;
    };
    struct AdversaryWake {
        std::uint64_t token;
    };
    struct DamageTick {};
    using Payload = std::variant<Deliver, PeerTimer, PeerCompute, AdversaryWake, DamageTick>;

    void setup();
    void seed_foothold();
    void schedule_damage();
    void apply_damage();
    void census_move(const protocol::AuVersion& from, const protocol::AuVersion& to);
    void check_census();
    void snapshot(bool force);
    double message_bits(const protocol::PollMessage& m) const;
    bool stops_on(protocol::AlarmKind k) const;

    WorldConfig cfg_;
    std::shared_ptr<const protocol::PeerConfig> peer_cfg_;
    netsim::EventQueue<Payload> queue_;
    Rng rng_;
    Rng damage_rng_;
    Rng link_rng_;
    std::vector<netsim::Link> links_;
    std::vector<std::unique_ptr<protocol::LoyalPeer>> loyal_;  // indexed by population id
    std::vector<netsim::SerialCpu> cpus_;
    std::vector<PeerId> loyal_ids_;
    std::vector<std::uint8_t> malign_flag_;                    // population ids only
    std::unique_ptr<adversary::Adversary> adversary_;
    std::unordered_map<std::uint64_t, effort::AuContent> content_cache_;
    std::uint64_t next_version_id_ = 1000;

    metrics::MetricsLog log_;
    metrics::Census census_;
    std::vector<double> foothold_;   // per population id, loyal peers only
    double foothold_sum_ = 0;
    std::vector<std::uint8_t> interpoll_alarmed_;
    std::unordered_map<PollId, std::size_t> attack_index_;
    SimTime last_snapshot_ = -1;
    bool stopped_ = false;
    bool ready_ = false;
};

}  // namespace lockss::sim
