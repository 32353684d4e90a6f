#include "lockss/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lockss::protocol {

const char* to_string(AuKind k)
{
    switch (k) {
    case AuKind::Good: return "good";
    case AuKind::Bad: return "bad";
    case AuKind::RandomDamage: return "damaged";
    case AuKind::Bogus: return "bogus";
    }
    return "?";
}

const char* to_string(AlarmKind k)
{
    switch (k) {
    case AlarmKind::InconclusivePoll: return "inconclusive_poll";
    case AlarmKind::LocalSpoofing: return "local_spoofing";
    case AlarmKind::InterPollInterval: return "inter_poll_interval";
    }
    return "?";
}

const char* to_string(Tally t)
{
    switch (t) {
    case Tally::LandslideWin: return "landslide_win";
    case Tally::LandslideLoss: return "landslide_loss";
    case Tally::Inconclusive: return "inconclusive";
    case Tally::NoQuorum: return "no_quorum";
    }
    return "?";
}

void ProtocolParams::validate() const
{
    if (inner_size == 0) throw ConfigError("protocol: N must be positive");
    if (quorum == 0 || quorum > inner_size) throw ConfigError("protocol: need 0 < Q <= N");
    if (2 * max_minority >= quorum) throw ConfigError("protocol: need D < Q/2");
    if (!(churn >= 0.0 && churn <= 1.0)) throw ConfigError("protocol: churn must lie in [0, 1]");
    if (!(mean_interval > 0.0)) throw ConfigError("protocol: R must be positive");
    if (!(interval_jitter >= 0.0 && interval_jitter < 1.0)) throw ConfigError("protocol: interval jitter must lie in [0, 1)");
    if (max_entry_age == 0) throw ConfigError("protocol: E_age must be positive");
    if (!(ref_target_multiplier >= 0.0)) throw ConfigError("protocol: reference target multiplier must be >= 0");
    if (!(abort_retry_delay > 0.0)) throw ConfigError("protocol: abort retry delay must be positive");
    if (!(interpoll_alarm_factor > 0.0)) throw ConfigError("protocol: inter-poll alarm factor must be positive");
}

const ReferenceEntry* ReferenceList::find(PeerId p) const
{
    for (const auto& e : entries_)
        if (e.peer == p) return &e;
    return nullptr;
}

bool ReferenceList::upsert(PeerId p, std::uint64_t stamp)
{
    if (p == owner_) return false;
    for (auto& e : entries_) {
        if (e.peer == p) {
            e.time_inserted = stamp;
            return false;
        }
    }
    entries_.push_back({p, stamp});
    return true;
}

bool ReferenceList::insert(PeerId p, std::uint64_t stamp)
{
    if (p == owner_ || contains(p)) return false;
    entries_.push_back({p, stamp});
    return true;
}

bool ReferenceList::erase(PeerId p)
{
    auto it = std::find_if(entries_.begin(), entries_.end(), [p](const ReferenceEntry& e) { return e.peer == p; });
    if (it == entries_.end()) return false;
    entries_.erase(it);
    return true;
}

std::size_t ReferenceList::drop_stale(std::uint64_t counter, std::uint64_t max_age)
{
    const auto before = entries_.size();
    std::erase_if(entries_, [&](const ReferenceEntry& e) { return counter - e.time_inserted >= max_age; });
    return before - entries_.size();
}

SimTime sample_interval(const ProtocolParams& params, Rng& rng)
{
    std::uniform_real_distribution<double> u(1.0 - params.interval_jitter, 1.0 + params.interval_jitter);
    return params.mean_interval * u(rng);
}

void bootstrap(PeerState& peer, const ProtocolParams& params, SimTime now, Rng& rng)
{
    if (peer.friends.empty()) throw ConfigError("bootstrap: peer " + std::to_string(peer.id.value) + " has no friends");
    peer.reference_list = ReferenceList(peer.id);
    for (PeerId f : peer.friends) peer.reference_list.insert(f, peer.poll_counter);
    if (params.prior_friend_history)
        for (PeerId f : peer.friends)
            if (f != peer.id) peer.vote_history.emplace(f, HistoryEntry{PollId{0}, peer.au.id});
    SimTime first = sample_interval(params, rng);
    if (params.stagger_first_poll) first *= std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    peer.refresh_deadline = now + first;
}

std::vector<PeerId> choose_invitees(const ReferenceList& list, std::size_t count,
                                    const std::unordered_set<PeerId>& exclude, Rng& rng)
{
    std::vector<PeerId> pool;
    pool.reserve(list.size());
    for (const auto& e : list.entries())
        if (!exclude.contains(e.peer)) pool.push_back(e.peer);
    if (pool.size() <= count) {
        std::shuffle(pool.begin(), pool.end(), rng);
        return pool;
    }
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(count);
    return pool;
}

Tally tabulate(std::size_t valid, std::size_t agreeing, const ProtocolParams& params)
{
    if (agreeing > valid) throw std::invalid_argument("tabulate: more agreeing votes than valid votes");
    if (valid < params.quorum) return Tally::NoQuorum;
    if (agreeing <= params.max_minority) return Tally::LandslideLoss;
    if (agreeing + params.max_minority >= valid) return Tally::LandslideWin;
    return Tally::Inconclusive;
}

bool accepts_invitation(const PeerState& voter, bool wants_own_poll, SimTime now)
{
    if (voter.busy != Commitment::Idle) return false;
    if (wants_own_poll || now >= voter.refresh_deadline) return false;
    return true;
}

std::vector<PeerId> form_outer_circle(std::span<const std::vector<PeerId>> nominations, const ReferenceList& list,
                                      const std::unordered_set<PeerId>& already_invited,
                                      const ProtocolParams& params, Rng& rng)
{
    const std::size_t target = params.reference_target();
    const std::size_t needed = list.size() >= target ? 0 : target - list.size();
    if (needed == 0 || nominations.empty()) return {};

    const std::size_t n = nominations.size();
    std::vector<std::size_t> quota(n, needed / n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < needed % n; ++k) ++quota[order[k]];

    std::unordered_set<PeerId> chosen;
    std::vector<PeerId> outer;
    for (std::size_t j = 0; j < n; ++j) {
        if (quota[j] == 0) continue;
        std::vector<PeerId> fresh;
        for (PeerId p : nominations[j]) {
            if (p == list.owner() || list.contains(p) || already_invited.contains(p) || chosen.contains(p)) continue;
            if (std::find(fresh.begin(), fresh.end(), p) != fresh.end()) continue;
            fresh.push_back(p);
        }
        std::shuffle(fresh.begin(), fresh.end(), rng);
        if (fresh.size() > quota[j]) fresh.resize(quota[j]);
        for (PeerId p : fresh) {
            chosen.insert(p);
            outer.push_back(p);
        }
    }
    return outer;
}

UpdateReport update_reference_list(PeerState& peer, std::span<const InnerVote> inner,
                                   std::span<const PeerId> outer_agreeing, const ProtocolParams& params, Rng& rng)
{
    UpdateReport rep;
    auto& list = peer.reference_list;
    const std::uint64_t stamp = peer.poll_counter;

    std::vector<PeerId> agreeing;
    for (const auto& v : inner) {
        if (v.verdict == effort::Verdict::Disagreeing) {
            list.erase(v.peer);
            ++rep.removed_disagreeing;
        } else if (v.verdict == effort::Verdict::Agreeing) {
            agreeing.push_back(v.peer);
        }
    }
    // Bare-quorum rule: only enough agreeing voters go to bring removals up to Q.
    const std::size_t more = rep.removed_disagreeing >= params.quorum ? 0 : params.quorum - rep.removed_disagreeing;
    std::shuffle(agreeing.begin(), agreeing.end(), rng);
    const std::size_t cut = std::min(more, agreeing.size());
    for (std::size_t k = 0; k < cut; ++k) {
        list.erase(agreeing[k]);
        ++rep.removed_agreeing;
    }
    for (std::size_t k = cut; k < agreeing.size(); ++k) {
        list.upsert(agreeing[k], stamp);
        ++rep.refreshed;
    }
    for (PeerId p : outer_agreeing)
        if (list.upsert(p, stamp)) ++rep.inserted_outer;

    const std::size_t churn_budget =
        static_cast<std::size_t>(std::llround(params.churn * static_cast<double>(list.size())));
    if (churn_budget > 0) {
        std::vector<PeerId> candidates;
        for (PeerId f : peer.friends)
            if (f != peer.id && !list.contains(f)) candidates.push_back(f);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        for (std::size_t k = 0; k < std::min(churn_budget, candidates.size()); ++k) {
            list.insert(candidates[k], stamp);
            ++rep.churned;
        }
    }
    rep.aged_out = list.drop_stale(peer.poll_counter, params.max_entry_age);
    return rep;
}

UpdateReport update_reference_list_no_quorum(PeerState& peer, std::span<const PeerId> agreeing)
{
    UpdateReport rep;
    for (PeerId p : agreeing) {
        if (peer.reference_list.upsert(p, peer.poll_counter))
            ++rep.inserted_outer;
        else
            ++rep.refreshed;
    }
    return rep;
}

bool should_supply_repair(const PeerState& supplier, PeerId requester)
{
    return supplier.vote_history.contains(requester);
}

std::optional<Alarm> check_interpoll_alarm(const PeerState& peer, SimTime now, const ProtocolParams& params)
{
    if (now - peer.last_quorate_poll_time > params.interpoll_alarm_factor * params.mean_interval)
        return Alarm{AlarmKind::InterPollInterval, peer.id, now, std::nullopt};
    return std::nullopt;
}

}  // namespace lockss::protocol
