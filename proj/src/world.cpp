#include "lockss/world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lockss::sim {

using protocol::AlarmKind;
using protocol::AuKind;
using protocol::AuVersion;

namespace {

template <class... Fs>
struct Overload : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overload(Fs...) -> Overload<Fs...>;

constexpr std::uint64_t kLinkStream = 2;
constexpr std::uint64_t kDamageStream = 1;
constexpr std::uint64_t kAdversaryStream = 3;
constexpr std::uint64_t kPeerStreamBase = 1000;

}  // namespace

void WorldConfig::validate() const
{
    if (peers < 2) throw ConfigError("world: need at least two peers");
    if (cluster_size == 0) throw ConfigError("world: cluster size must be positive");
    if (cluster_size > peers) throw ConfigError("world: cluster larger than the population");
    if (!(intra_cluster_fraction >= 0.0 && intra_cluster_fraction <= 1.0))
        throw ConfigError("world: intra-cluster fraction must lie in [0, 1]");
    if (friends == 0 || friends >= peers) throw ConfigError("world: friends count must lie in [1, peers)");
    if (!(horizon > 0.0)) throw ConfigError("world: horizon must be positive");
    if (!(damage_mtbf > 0.0)) throw ConfigError("world: damage MTBF must be positive");
    if (!(snapshot_spacing >= 0.0)) throw ConfigError("world: snapshot spacing must be >= 0");
    protocol.validate();
    effort.validate();
    net.validate();
    adversary.validate();
}

Population build_population(std::size_t peers, std::size_t cluster_size, double intra_fraction,
                            std::size_t friends, Rng& rng)
{
    if (cluster_size == 0 || cluster_size > peers) throw ConfigError("population: cluster larger than the population");
    if (friends >= peers) throw ConfigError("population: more friends than other peers");
    Population pop;
    pop.clusters = (peers + cluster_size - 1) / cluster_size;
    pop.cluster.resize(peers);
    pop.friends.resize(peers);
    for (std::size_t i = 0; i < peers; ++i) pop.cluster[i] = i / cluster_size;

    const auto intra_target = static_cast<std::size_t>(std::llround(intra_fraction * static_cast<double>(friends)));
    for (std::size_t i = 0; i < peers; ++i) {
        const std::size_t c = pop.cluster[i];
        const std::size_t begin = c * cluster_size;
        const std::size_t end = std::min(begin + cluster_size, peers);
        std::vector<std::uint32_t> mates;
        for (std::size_t j = begin; j < end; ++j)
            if (j != i) mates.push_back(static_cast<std::uint32_t>(j));
        std::shuffle(mates.begin(), mates.end(), rng);
        const std::size_t intra = std::min(intra_target, mates.size());
        auto& f = pop.friends[i];
        for (std::size_t k = 0; k < intra; ++k) f.push_back(PeerId{mates[k]});

        // The rest come from outside the cluster, distinct.
        const std::size_t outside = peers - (end - begin);
        const std::size_t want = std::min(friends - intra, outside);
        std::uniform_int_distribution<std::size_t> pick(0, peers - 1);
        std::vector<std::uint32_t> chosen;
        while (chosen.size() < want) {
            const std::size_t j = pick(rng);
            if (j >= begin && j < end) continue;
            const auto v = static_cast<std::uint32_t>(j);
            if (std::find(chosen.begin(), chosen.end(), v) != chosen.end()) continue;
            chosen.push_back(v);
        }
        for (auto v : chosen) f.push_back(PeerId{v});
    }
    return pop;
}

protocol::Timing derive_timing(const protocol::ProtocolParams& p, const effort::EffortParams& e,
                               const netsim::NetParams& n)
{
    const auto costs = effort::cost_table(e);
    const double slow = 5.0;  // a peer assumes the other side may be this much slower
    const double ctrl = netsim::worst_flow_time(n, n.control_bytes * 8.0);
    const double rounds = effort::num_rounds(e.blocks);
    const double vote = netsim::worst_flow_time(n, (n.vote_base_bytes + rounds * n.vote_round_bytes) * 8.0);
    const double au = netsim::worst_flow_time(n, n.au_bytes * 8.0);
    const double margin = 1.0;
    protocol::Timing t;
    t.challenge = 2.0 * ctrl + margin;
    t.effort = slow * static_cast<double>(p.inner_size) * e.seconds(costs.poll_effort_construct) + 2.0 * ctrl + margin;
    t.nomination = slow * e.seconds(costs.poll_effort_verify) + 2.0 * ctrl + margin;
    t.vote = slow * e.seconds(costs.poll_effort_verify + costs.vote_construct) + ctrl + vote + margin;
    t.repair = ctrl + au + margin;
    return t;
}

std::shared_ptr<const protocol::PeerConfig> make_peer_config(const WorldConfig& cfg)
{
    auto pc = std::make_shared<protocol::PeerConfig>();
    pc->protocol = cfg.protocol;
    pc->effort = cfg.effort;
    pc->costs = effort::cost_table(cfg.effort);
    pc->timing = derive_timing(cfg.protocol, cfg.effort, cfg.net);
    pc->vote_rounds = effort::num_rounds(cfg.effort.blocks);
    return pc;
}

World::World(WorldConfig config)
    : cfg_(std::move(config)),
      rng_(make_stream(cfg_.seed, 0)),
      damage_rng_(make_stream(cfg_.seed, kDamageStream)),
      link_rng_(make_stream(cfg_.seed, kLinkStream))
{
    cfg_.validate();
    peer_cfg_ = make_peer_config(cfg_);
    setup();
}

World::~World() = default;

void World::setup()
{
    const std::size_t P = cfg_.peers;
    Population pop = build_population(P, cfg_.cluster_size, cfg_.intra_cluster_fraction, cfg_.friends, rng_);

    const std::size_t n_sub = adversary::subverted_count(cfg_.adversary, P);
    std::vector<std::uint32_t> ids(P);
    std::iota(ids.begin(), ids.end(), 0u);
    std::shuffle(ids.begin(), ids.end(), rng_);
    malign_flag_.assign(P, 0);
    std::vector<PeerId> subverted;
    for (std::size_t k = 0; k < n_sub; ++k) {
        malign_flag_[ids[k]] = 1;
        subverted.push_back(PeerId{ids[k]});
    }
    std::sort(subverted.begin(), subverted.end());

    const std::size_t n_extra = adversary::extra_nic_count(cfg_.adversary, n_sub, cfg_.protocol);
    links_.reserve(P + n_extra);
    for (std::size_t i = 0; i < P; ++i) links_.push_back(netsim::sample_link(cfg_.net, link_rng_));
    std::vector<PeerId> extra;
    for (std::size_t k = 0; k < n_extra; ++k) {
        extra.push_back(PeerId{static_cast<std::uint32_t>(links_.size())});
        links_.push_back(netsim::sample_link(cfg_.net, link_rng_));
    }

    loyal_.resize(P);
    cpus_.resize(P);
    foothold_.assign(P, 0.0);
    interpoll_alarmed_.assign(P, 0);
    for (std::size_t i = 0; i < P; ++i) {
        if (malign_flag_[i]) continue;
        loyal_ids_.push_back(PeerId{static_cast<std::uint32_t>(i)});
        loyal_[i] = std::make_unique<protocol::LoyalPeer>(PeerId{static_cast<std::uint32_t>(i)}, pop.friends[i],
                                                          peer_cfg_, make_stream(cfg_.seed, kPeerStreamBase + i));
    }
    // The other side of the prior history: friends voted in our past polls.
    if (cfg_.protocol.prior_friend_history)
        for (std::size_t i = 0; i < P; ++i)
            for (PeerId f : pop.friends[i])
                if (loyal_[f.value]) loyal_[f.value]->mutable_state().voted_in.insert(PeerId{static_cast<std::uint32_t>(i)});
    census_.good = loyal_ids_.size();
    census_.malign = n_sub;
    log_.loyal_peers = loyal_ids_.size();
    log_.population = P;
    log_.subverted = n_sub;

    if (cfg_.adversary.strategy != adversary::Strategy::None)
        adversary_ = std::make_unique<adversary::Adversary>(cfg_.adversary, subverted, extra,
                                                            make_stream(cfg_.seed, kAdversaryStream));

    for (PeerId id : loyal_ids_) loyal_[id.value]->start(*this);
    if (adversary_ && cfg_.adversary.strategy == adversary::Strategy::Stealth &&
        cfg_.adversary.phase == adversary::StealthPhase::Attack && cfg_.adversary.initial_foothold > 0.0)
        seed_foothold();
    if (adversary_) adversary_->start(*this);
    schedule_damage();
    check_census();
    ready_ = true;
    snapshot(true);
}

void World::seed_foothold()
{
    const auto& nics = adversary_->state().nics;
    if (nics.empty()) return;
    const double f = cfg_.adversary.initial_foothold;
    std::bernoulli_distribution malign_slot(f);
    std::uniform_int_distribution<std::size_t> pick_nic(0, nics.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_loyal(0, loyal_ids_.size() - 1);
    for (PeerId id : loyal_ids_) {
        auto& st = loyal_[id.value]->mutable_state();
        auto& list = st.reference_list;
        std::vector<protocol::ReferenceEntry> entries(list.entries().begin(), list.entries().end());
        std::vector<std::uint8_t> slot(entries.size());
        if (cfg_.adversary.exact_foothold) {
            const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(entries.size())));
            std::fill(slot.begin(), slot.begin() + static_cast<std::ptrdiff_t>(std::min(k, slot.size())), 1);
            std::shuffle(slot.begin(), slot.end(), rng_);
        } else {
            for (auto& b : slot) b = malign_slot(rng_) ? 1 : 0;
        }
        protocol::ReferenceList rebuilt(id);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            const bool want_malign = slot[i] != 0;
            PeerId p = e.peer;
            if (want_malign && !is_malign(p)) {
                for (int tries = 0; tries < 64; ++tries) {
                    const PeerId cand = nics[pick_nic(rng_)];
                    if (!rebuilt.contains(cand) && !list.contains(cand)) {
                        p = cand;
                        break;
                    }
                }
            } else if (!want_malign && is_malign(p)) {
                for (int tries = 0; tries < 64; ++tries) {
                    const PeerId cand = loyal_ids_[pick_loyal(rng_)];
                    if (cand != id && !rebuilt.contains(cand) && !list.contains(cand)) {
                        p = cand;
                        break;
                    }
                }
            }
            rebuilt.insert(p, e.time_inserted);
        }
        list = std::move(rebuilt);
        reference_list_changed(id);
    }
}

bool World::is_malign(PeerId id) const
{
    if (id.value < malign_flag_.size()) return malign_flag_[id.value] != 0;
    return adversary_ && adversary_->controls(id);
}

const protocol::LoyalPeer* World::peer(PeerId id) const
{
    return id.value < loyal_.size() ? loyal_[id.value].get() : nullptr;
}

double World::average_foothold() const
{
    return loyal_ids_.empty() ? 0.0 : foothold_sum_ / static_cast<double>(loyal_ids_.size());
}

bool World::stops_on(AlarmKind k) const
{
    if (!cfg_.stop_on_alarm) return false;
    if (cfg_.stop_kinds.empty()) return true;
    return std::find(cfg_.stop_kinds.begin(), cfg_.stop_kinds.end(), k) != cfg_.stop_kinds.end();
}

const metrics::MetricsLog& World::run()
{
    while (!queue_.empty() && !stopped_) {
        if (queue_.next_time() > cfg_.horizon) break;
        auto ev = queue_.pop();
        ++log_.events;
        std::visit(Overload{[&](Deliver& d) {
                                if (d.to.value < loyal_.size() && loyal_[d.to.value]) {
                                    loyal_[d.to.value]->on_message(*this, d.from, std::move(d.msg));
                                } else if (adversary_ && adversary_->controls(d.to)) {
                                    adversary_->on_message(*this, d.to, d.from, std::move(d.msg));
                                }
                            },
                            [&](PeerTimer& t) { loyal_[t.who.value]->on_timer(*this, t.tag); },
                            [&](PeerCompute& c) { loyal_[c.who.value]->on_compute(*this, c.tag); },
                            [&](AdversaryWake& w) { adversary_->on_wakeup(*this, w.token); },
                            [&](DamageTick&) { apply_damage(); }},
                   ev.payload);
    }
    log_.end_time = stopped_ ? *log_.stopped_at : std::min(cfg_.horizon, std::max(queue_.now(), cfg_.horizon));
    if (stopped_) log_.end_time = *log_.stopped_at;
    log_.final_foothold = average_foothold();
    if (adversary_) log_.adversary_effort_seconds = adversary_->pool().busy_total() + adversary_->attrition_busy();
    snapshot(true);
    return log_;
}

double World::message_bits(const protocol::PollMessage& m) const
{
    const auto& n = cfg_.net;
    return 8.0 * std::visit(Overload{[&](const protocol::VoteMsg& v) {
                                         return n.vote_base_bytes +
                                                static_cast<double>(v.vote.rounds.size()) * n.vote_round_bytes;
                                     },
                                     [&](const protocol::RepairMsg&) { return n.au_bytes; },
                                     [&](const auto&) { return n.control_bytes; }},
                            m);
}

void World::send(PeerId from, PeerId to, protocol::PollMessage msg)
{
    if (from.value >= links_.size() || to.value >= links_.size()) return;
    const SimTime at = now() + netsim::flow_time(links_[from.value], links_[to.value], message_bits(msg));
    queue_.push(at, Deliver{from, to, std::move(msg)});
}

SimTime World::start_compute(PeerId who, double cost_units, protocol::ComputeTag tag)
{
    const SimTime done = cpus_.at(who.value).charge(now(), cfg_.effort.seconds(cost_units));
    queue_.push(done, PeerCompute{who, tag});
    return done;
}

void World::set_timer(PeerId who, SimTime at, protocol::TimerTag tag) { queue_.push(at, PeerTimer{who, tag}); }

void World::schedule_adversary(SimTime at, std::uint64_t token) { queue_.push(at, AdversaryWake{token}); }

void World::raise_alarm(const protocol::Alarm& alarm)
{
    log_.alarms.push_back({alarm.time, alarm.kind, alarm.peer});
    if (alarm.kind == AlarmKind::InterPollInterval && alarm.peer.value < interpoll_alarmed_.size() &&
        !interpoll_alarmed_[alarm.peer.value]) {
        interpoll_alarmed_[alarm.peer.value] = 1;
        log_.first_interpoll_alarm.push_back(alarm.time);
    }
    if (stops_on(alarm.kind) && !stopped_) {
        stopped_ = true;
        log_.stopped_at = alarm.time;
    }
}

void World::poll_concluded(const protocol::PollOutcome& out)
{
    ++log_.polls_concluded;
    switch (out.tally) {
    case protocol::Tally::LandslideWin: ++log_.wins; break;
    case protocol::Tally::LandslideLoss: ++log_.losses; break;
    case protocol::Tally::Inconclusive: ++log_.inconclusive; break;
    case protocol::Tally::NoQuorum: ++log_.no_quorum; break;
    }
    if (out.aborted) ++log_.aborted;
    if (out.repaired) ++log_.repairs;
    if (out.valid_votes >= cfg_.protocol.quorum) ++log_.quorate_polls;
    if (cfg_.record_polls)
        log_.polls.push_back({out.finished, out.initiator, out.tally, static_cast<std::uint16_t>(out.valid_votes),
                              static_cast<std::uint16_t>(out.agreeing), out.repaired, out.aborted});
    if (auto it = attack_index_.find(out.poll); it != attack_index_.end()) {
        log_.attacks[it->second].outcome = out.tally;
        attack_index_.erase(it);
    }
}

void World::reference_list_changed(PeerId who)
{
    if (who.value >= loyal_.size() || !loyal_[who.value]) return;
    const auto& list = loyal_[who.value]->state().reference_list;
    std::size_t bad = 0;
    for (const auto& e : list.entries())
        if (is_malign(e.peer)) ++bad;
    const double ratio = list.empty() ? 0.0 : static_cast<double>(bad) / static_cast<double>(list.size());
    foothold_sum_ += ratio - foothold_[who.value];
    foothold_[who.value] = ratio;
    const double avg = average_foothold();
    if (avg > log_.max_foothold) {
        log_.max_foothold = avg;
        log_.max_foothold_time = now();
    }
    snapshot(false);
}

void World::census_move(const AuVersion& from, const AuVersion& to)
{
    auto bucket = [&](const AuVersion& v) -> std::size_t& {
        switch (v.kind) {
        case AuKind::Good: return census_.good;
        case AuKind::Bad: return census_.bad;
        default: return census_.damaged;
        }
    };
    --bucket(from);
    ++bucket(to);
}

void World::au_changed(PeerId who, AuVersion before, AuVersion after)
{
    (void)who;
    census_move(before, after);
    if (after.kind == AuKind::Bad && before.kind != AuKind::Bad) ++log_.bad_adoptions;
    check_census();
    snapshot(false);
}

void World::check_census()
{
    if (census_.total() != cfg_.peers) throw InvariantError("census does not cover the population");
    const double P = static_cast<double>(cfg_.peers);
    const double damaged_loyal = static_cast<double>(census_.bad + census_.damaged);
    if (damaged_loyal / P > log_.max_damaged_loyal_fraction) {
        log_.max_damaged_loyal_fraction = damaged_loyal / P;
        log_.max_damaged_loyal_time = now();
    }
    const double bad = (damaged_loyal + static_cast<double>(census_.malign)) / P;
    log_.max_bad_fraction = std::max(log_.max_bad_fraction, bad);
    if (bad > 0.5 && !log_.irrecoverable) {
        log_.irrecoverable = true;
        log_.irrecoverable_time = now();
    }
}

void World::snapshot(bool force)
{
    if (!ready_) return;  // setup registers peers one by one
    if (!force && now() - last_snapshot_ < cfg_.snapshot_spacing) return;
    last_snapshot_ = now();
    log_.snapshots.push_back({now(), average_foothold(), census_});
}

const effort::AuContent& World::content(const AuVersion& au)
{
    auto it = content_cache_.find(au.id);
    if (it != content_cache_.end()) return it->second;
    return content_cache_.emplace(au.id, effort::make_content(au.id, cfg_.effort.blocks)).first->second;
}

std::optional<adversary::InnerCount> World::inner_affirmatives(PeerId initiator, PollId poll) const
{
    const auto* p = peer(initiator);
    if (!p || !p->current_poll() || p->current_poll()->id != poll) return std::nullopt;
    adversary::InnerCount n;
    for (const auto& inv : p->current_poll()->invitees) {
        if (inv.outer || inv.status != protocol::InviteeStatus::Affirmative) continue;
        if (is_malign(inv.peer))
            ++n.malign;
        else
            ++n.loyal;
    }
    return n;
}

const protocol::ReferenceList* World::reference_list(PeerId id) const
{
    const auto* p = peer(id);
    return p ? &p->state().reference_list : nullptr;
}

PeerId World::fresh_identity()
{
    const PeerId id{static_cast<std::uint32_t>(links_.size())};
    links_.push_back(netsim::sample_link(cfg_.net, link_rng_));
    return id;
}

AuVersion World::fresh_bogus_version() { return AuVersion{next_version_id_++, AuKind::Bogus}; }

void World::attack_decided(PeerId initiator, PollId poll, std::size_t malign, std::size_t loyal,
                           const AuVersion& version, bool attacking)
{
    (void)version;
    attack_index_[poll] = log_.attacks.size();
    log_.attacks.push_back({now(), initiator, poll, malign, loyal, attacking, std::nullopt});
}

void World::schedule_damage()
{
    if (loyal_ids_.empty()) return;
    const double rate_mtbf = cfg_.damage_mtbf / static_cast<double>(loyal_ids_.size());
    const SimTime delay = netsim::next_damage_delay(rate_mtbf, damage_rng_);
    if (std::isinf(delay) || now() + delay > cfg_.horizon) return;
    queue_.push(now() + delay, DamageTick{});
}

void World::apply_damage()
{
    std::uniform_int_distribution<std::size_t> pick(0, loyal_ids_.size() - 1);
    const PeerId victim = loyal_ids_[pick(damage_rng_)];
    ++log_.damage_events;
    loyal_[victim.value]->damage(*this, AuVersion{next_version_id_++, AuKind::RandomDamage});
    schedule_damage();
}

}  // namespace lockss::sim
