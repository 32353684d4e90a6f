#include "lockss/adversary.hpp"

#include <algorithm>

namespace lockss::adversary {

using protocol::AuVersion;
using protocol::PollMessage;

namespace {

constexpr SimTime kKnowledgeLifetime = 3.0 * kDay;

}  // namespace

const char* to_string(Strategy s)
{
    switch (s) {
    case Strategy::None: return "none";
    case Strategy::Stealth: return "stealth";
    case Strategy::Nuisance: return "nuisance";
    case Strategy::Attrition: return "attrition";
    }
    return "?";
}

Strategy parse_strategy(const std::string& s)
{
    if (s == "none") return Strategy::None;
    if (s == "stealth") return Strategy::Stealth;
    if (s == "nuisance") return Strategy::Nuisance;
    if (s == "attrition") return Strategy::Attrition;
    throw ConfigError("unknown adversary strategy '" + s + "'");
}

bool stealth_vulnerable(std::size_t malign, std::size_t loyal, std::size_t quorum, std::size_t max_minority)
{
    return malign + loyal >= quorum && malign > loyal && loyal <= max_minority;
}

bool nuisance_vulnerable(std::size_t malign, std::size_t loyal, std::size_t quorum, std::size_t max_minority)
{
    return malign + loyal >= quorum && loyal > max_minority && malign > max_minority;
}

void AdversaryConfig::validate() const
{
    if (!(subversion >= 0.0 && subversion < 1.0)) throw ConfigError("adversary: subversion must lie in [0, 1)");
    if (!(initial_foothold >= 0.0 && initial_foothold <= 1.0))
        throw ConfigError("adversary: initial foothold must lie in [0, 1]");
    if (strategy == Strategy::Attrition && attrition_cpus == 0 && !unlimited_cpus)
        throw ConfigError("adversary: attrition needs at least one CPU");
}

std::size_t subverted_count(const AdversaryConfig& cfg, std::size_t population)
{
    if (cfg.strategy == Strategy::None || cfg.strategy == Strategy::Attrition) return 0;
    std::size_t n = cfg.subverted ? *cfg.subverted
                                  : static_cast<std::size_t>(static_cast<double>(population) * cfg.subversion + 1e-9);
    if (n >= population) throw ConfigError("adversary: cannot subvert the whole population");
    return n;
}

std::size_t auto_nic_total(const protocol::ProtocolParams& p)
{
    return p.reference_target() + p.inner_size + p.inner_size * p.nominations;
}

std::size_t extra_nic_count(const AdversaryConfig& cfg, std::size_t subverted, const protocol::ProtocolParams& p)
{
    if (cfg.strategy != Strategy::Stealth && cfg.strategy != Strategy::Nuisance) return 0;
    if (cfg.extra_nics) return *cfg.extra_nics;
    const std::size_t total = auto_nic_total(p);
    return total > subverted ? total - subverted : 0;
}

Adversary::Adversary(AdversaryConfig config, std::vector<PeerId> subverted, std::vector<PeerId> extra_nics, Rng rng)
    : rng_(std::move(rng)),
      pool_(config.unlimited_cpus ? 0 : subverted.size() + config.extra_cpus)
{
    state_.config = std::move(config);
    subverted_ = subverted.size();
    state_.nics = subverted;
    state_.nics.insert(state_.nics.end(), extra_nics.begin(), extra_nics.end());
    state_.malign.insert(state_.nics.begin(), state_.nics.end());
    if (state_.config.strategy == Strategy::Attrition) workers_.resize(state_.config.attrition_cpus);
    if (pool_.workers() == 0 && !state_.config.unlimited_cpus && state_.config.strategy != Strategy::Attrition &&
        state_.config.strategy != Strategy::None)
        pool_ = netsim::CpuPool(1);
}

SimTime Adversary::attrition_busy() const
{
    SimTime t = 0;
    for (const auto& w : workers_) t += w.cpu.busy_total();
    return t;
}

std::uint64_t Adversary::enqueue(Job job)
{
    const std::uint64_t token = next_token_++;
    jobs_.emplace(token, job);
    return token;
}

void Adversary::start(AdversaryEnv& env)
{
    const auto& pc = env.peer_config();
    if (state_.config.strategy == Strategy::Stealth && state_.config.stealth_polls) {
        // Only identities that used to be real peers keep a poll schedule.
        for (std::size_t k = 0; k < subverted_; ++k) {
            const PeerId id = state_.nics[k];
            env.schedule_adversary(env.now() + protocol::sample_interval(pc.protocol, rng_),
                                   enqueue({JobKind::StealthPoll, id, {}, {}, 0}));
        }
    }
    if (state_.config.strategy == Strategy::Attrition)
        for (std::size_t w = 0; w < workers_.size(); ++w) attrition_begin(env, w);
}

void Adversary::on_wakeup(AdversaryEnv& env, std::uint64_t token)
{
    auto it = jobs_.find(token);
    if (it == jobs_.end()) return;
    const Job job = it->second;
    jobs_.erase(it);
    const auto& pc = env.peer_config();
    switch (job.kind) {
    case JobKind::Vote: cast_vote(env, job); return;
    case JobKind::StealthPoll:
        stealth_poll(env, job.nic);
        env.schedule_adversary(env.now() + protocol::sample_interval(pc.protocol, rng_),
                               enqueue({JobKind::StealthPoll, job.nic, {}, {}, 0}));
        return;
    case JobKind::StealthProof: {
        auto own = own_polls_.find(job.poll);
        if (own == own_polls_.end()) return;
        const Digest& challenge = own->second.challenges.at(job.target);
        env.send(job.nic, job.target,
                 protocol::PollProofMsg{job.poll, effort::poll_effort_prove(job.poll, challenge, pc.effort)});
        return;
    }
    case JobKind::AttritionStep: attrition_step(env, job.worker, job.poll.value); return;
    case JobKind::AttritionProof: {
        auto& w = workers_[job.worker];
        if (w.poll != job.poll) return;
        if (w.next_proof < w.affirmative.size()) {
            const auto& [peer, challenge] = w.affirmative[w.next_proof++];
            env.send(w.identity, peer,
                     protocol::PollProofMsg{w.poll, effort::poll_effort_prove(w.poll, challenge, pc.effort)});
        }
        if (w.next_proof < w.affirmative.size()) {
            const SimTime done = w.cpu.charge(env.now(), pc.effort.seconds(pc.costs.poll_effort_construct));
            env.schedule_adversary(done, enqueue({JobKind::AttritionProof, w.identity, w.poll, {}, job.worker}));
        } else {
            attrition_begin(env, job.worker);
        }
        return;
    }
    }
}

void Adversary::on_message(AdversaryEnv& env, PeerId to, PeerId from, PollMessage msg)
{
    expire_knowledge(env.now());
    if (auto* m = std::get_if<protocol::PollMsg>(&msg)) return on_invite(env, to, from, *m);
    if (auto* m = std::get_if<protocol::PollProofMsg>(&msg)) return on_proof(env, to, from, *m);
    if (auto* m = std::get_if<protocol::RepairRequestMsg>(&msg)) return on_repair_request(env, to, from, *m);
    if (auto* m = std::get_if<protocol::PollChallengeMsg>(&msg)) return on_challenge(env, to, from, *m);
    if (auto* m = std::get_if<protocol::VoteMsg>(&msg)) return on_vote(to, from, *m);
    // Nominations and repairs sent to malign initiators carry nothing the adversary needs.
}

void Adversary::expire_knowledge(SimTime now)
{
    while (!knowledge_order_.empty() && knowledge_order_.front().first + kKnowledgeLifetime < now) {
        const PollId p = knowledge_order_.front().second;
        state_.per_poll.erase(p);
        own_polls_.erase(p);
        knowledge_order_.pop_front();
    }
}

// ---- as a voter in loyal polls ----

void Adversary::on_invite(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::PollMsg& m)
{
    protocol::PollChallengeMsg reply{m.poll, random_digest(rng_), random_digest(rng_), false};
    if (state_.config.strategy == Strategy::Attrition || state_.config.strategy == Strategy::None) {
        env.send(nic, from, reply);
        return;
    }
    auto [it, fresh] = state_.per_poll.try_emplace(m.poll);
    auto& k = it->second;
    if (fresh) {
        k.initiator = from;
        k.first_seen = env.now();
        knowledge_order_.emplace_back(env.now(), m.poll);
    }
    if (!k.challenges.contains(nic)) {
        k.invited.push_back(nic);
        k.challenges.emplace(nic, reply.challenge);
    }
    reply.challenge = k.challenges[nic];
    reply.yes = true;
    env.send(nic, from, reply);
}

void Adversary::decide(AdversaryEnv& env, PollKnowledge& k, PollId poll)
{
    const auto& pp = env.peer_config().protocol;
    PollDecision d;
    // Invitations into the outer circle look the same on arrival; the
    // initiator's inner circle says which of ours will be tallied.
    const auto inner = env.inner_affirmatives(k.initiator, poll).value_or(InnerCount{});
    d.malign = inner.malign;
    d.loyal = inner.loyal;
    d.version = state_.good_au;
    if (state_.config.strategy == Strategy::Stealth && state_.config.phase == StealthPhase::Attack &&
        stealth_vulnerable(d.malign, d.loyal, pp.quorum, pp.max_minority)) {
        d.version = state_.bad_au;
        d.attacking = true;
    } else if (state_.config.strategy == Strategy::Nuisance &&
               nuisance_vulnerable(d.malign, d.loyal, pp.quorum, pp.max_minority)) {
        d.version = env.fresh_bogus_version();
        d.attacking = true;
    }
    if (d.attacking) ++state_.polls_attacked;

    // Identities the initiator does not know yet, split among the malign nominators.
    const auto* list = env.reference_list(k.initiator);
    for (PeerId p : state_.nics) {
        if (list && list->contains(p)) continue;
        if (k.challenges.contains(p)) continue;
        d.nomination_pool.push_back(p);
    }
    std::shuffle(d.nomination_pool.begin(), d.nomination_pool.end(), rng_);
    env.attack_decided(k.initiator, poll, d.malign, d.loyal, d.version, d.attacking);
    k.decision = std::move(d);
}

void Adversary::on_proof(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::PollProofMsg& m)
{
    if (state_.config.strategy != Strategy::Stealth && state_.config.strategy != Strategy::Nuisance) return;
    auto it = state_.per_poll.find(m.poll);
    if (it == state_.per_poll.end()) return;
    auto& k = it->second;
    if (k.initiator != from || !k.challenges.contains(nic) || k.voted.contains(nic)) return;
    k.voted.insert(nic);
    if (!k.decision) decide(env, k, m.poll);

    const auto& pc = env.peer_config();
    const auto pos = static_cast<std::size_t>(std::find(k.invited.begin(), k.invited.end(), nic) - k.invited.begin());
    const auto& pool = k.decision->nomination_pool;
    if (pos < k.decision->malign && !pool.empty()) {
        protocol::NominateMsg nom{m.poll, {}};
        const std::size_t per = pc.protocol.nominations;
        for (std::size_t j = 0; j < std::min(per, pool.size()); ++j) nom.nominations.push_back(pool[(pos * per + j) % pool.size()]);
        env.send(nic, from, std::move(nom));
    }
    const SimTime work = pc.effort.seconds(pc.costs.poll_effort_verify + pc.costs.vote_construct);
    env.schedule_adversary(pool_.charge(env.now(), work), enqueue({JobKind::Vote, nic, m.poll, from, 0}));
}

void Adversary::cast_vote(AdversaryEnv& env, const Job& job)
{
    auto it = state_.per_poll.find(job.poll);
    if (it == state_.per_poll.end() || !it->second.decision) return;
    const auto& k = it->second;
    const auto& pc = env.peer_config();
    auto built = effort::construct_vote(k.challenges.at(job.nic), job.poll, job.nic, env.content(k.decision->version),
                                        pc.effort);
    env.send(job.nic, job.target, protocol::VoteMsg{job.poll, std::move(built.vote)});
    ++state_.votes_cast;
}

void Adversary::on_repair_request(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::RepairRequestMsg& m)
{
    if (state_.config.strategy != Strategy::Stealth) return;
    auto it = state_.per_poll.find(m.poll);
    if (it == state_.per_poll.end() || !it->second.decision) return;
    if (!it->second.voted.contains(nic) || !state_.repair_clients.contains(from)) return;
    env.send(nic, from, protocol::RepairMsg{m.poll, it->second.decision->version});
}

// ---- as a poll initiator ----

std::vector<PeerId> Adversary::sample_loyal(AdversaryEnv& env, std::size_t count, const std::vector<PeerId>& exclude)
{
    const auto& loyal = env.loyal_peers();
    std::vector<PeerId> out;
    if (loyal.empty()) return out;
    std::unordered_set<PeerId> taken(exclude.begin(), exclude.end());
    const std::size_t available = loyal.size() > taken.size() ? loyal.size() - taken.size() : 0;
    count = std::min(count, available);
    std::uniform_int_distribution<std::size_t> pick(0, loyal.size() - 1);
    std::size_t guard = 0;
    while (out.size() < count && guard++ < 100 * (count + 1)) {
        const PeerId p = loyal[pick(rng_)];
        if (taken.insert(p).second) out.push_back(p);
    }
    return out;
}

void Adversary::stealth_poll(AdversaryEnv& env, PeerId identity)
{
    const auto& pc = env.peer_config();
    const PollId poll{rng_()};
    own_polls_.emplace(poll, OwnPoll{identity, {}});
    knowledge_order_.emplace_back(env.now(), poll);
    ++state_.polls_called;
    for (PeerId p : sample_loyal(env, pc.protocol.inner_size, {}))
        env.send(identity, p, protocol::PollMsg{poll, random_digest(rng_)});
}

void Adversary::attrition_begin(AdversaryEnv& env, std::size_t w)
{
    auto& wk = workers_[w];
    attrition_polls_.erase(wk.poll);
    wk.identity = env.fresh_identity();
    state_.malign.insert(wk.identity);
    wk.poll = PollId{rng_()};
    wk.invited.clear();
    wk.affirmative.clear();
    wk.next_proof = 0;
    wk.rounds = 0;
    wk.collecting = true;
    ++wk.epoch;
    attrition_polls_[wk.poll] = w;
    ++state_.polls_called;
    const auto& pc = env.peer_config();
    const std::size_t target = state_.config.attrition_poll_size ? state_.config.attrition_poll_size : pc.protocol.inner_size;
    attrition_invite(env, w, target);
}

void Adversary::attrition_invite(AdversaryEnv& env, std::size_t w, std::size_t count)
{
    auto& wk = workers_[w];
    const auto& pc = env.peer_config();
    for (PeerId p : sample_loyal(env, count, wk.invited)) {
        wk.invited.push_back(p);
        env.send(wk.identity, p, protocol::PollMsg{wk.poll, random_digest(rng_)});
    }
    Job step{JobKind::AttritionStep, wk.identity, PollId{wk.epoch}, {}, w};
    env.schedule_adversary(env.now() + pc.timing.challenge, enqueue(step));
}

void Adversary::attrition_step(AdversaryEnv& env, std::size_t w, std::uint64_t epoch)
{
    auto& wk = workers_[w];
    if (wk.epoch != epoch) return;
    const auto& pc = env.peer_config();
    const std::size_t target = state_.config.attrition_poll_size ? state_.config.attrition_poll_size : pc.protocol.inner_size;
    if (wk.affirmative.size() < target && wk.rounds < state_.config.attrition_topups) {
        ++wk.rounds;
        attrition_invite(env, w, target - wk.affirmative.size());
        return;
    }
    // Challenges arriving from here on are ignored; every affirmative costs one proof.
    wk.collecting = false;
    ++wk.epoch;
    const SimTime slot = pc.effort.seconds(pc.costs.poll_effort_construct);
    const SimTime done = wk.cpu.charge(env.now(), slot);
    if (wk.affirmative.empty()) {
        // Nobody to pay: the slot still passes before the next throw-away poll.
        wk.next_proof = 0;
    }
    env.schedule_adversary(done, enqueue({JobKind::AttritionProof, wk.identity, wk.poll, {}, w}));
}

void Adversary::on_challenge(AdversaryEnv& env, PeerId nic, PeerId from, const protocol::PollChallengeMsg& m)
{
    if (auto a = attrition_polls_.find(m.poll); a != attrition_polls_.end()) {
        auto& wk = workers_[a->second];
        if (wk.identity != nic || !m.yes) return;
        if (!wk.collecting) return;
        for (const auto& [p, c] : wk.affirmative)
            if (p == from) return;
        wk.affirmative.emplace_back(from, m.challenge);
        return;
    }
    auto own = own_polls_.find(m.poll);
    if (own == own_polls_.end() || own->second.identity != nic || !m.yes) return;
    if (!own->second.challenges.emplace(from, m.challenge).second) return;
    const auto& pc = env.peer_config();
    const SimTime done = pool_.charge(env.now(), pc.effort.seconds(pc.costs.poll_effort_construct));
    env.schedule_adversary(done, enqueue({JobKind::StealthProof, nic, m.poll, from, 0}));
}

void Adversary::on_vote(PeerId nic, PeerId from, const protocol::VoteMsg& m)
{
    auto own = own_polls_.find(m.poll);
    if (own == own_polls_.end() || own->second.identity != nic) return;
    // Votes on our own polls are never verified; a voter is a future repair client.
    state_.repair_clients.insert(from);
}

}  // namespace lockss::adversary
