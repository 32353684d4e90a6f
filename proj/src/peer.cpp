#include "lockss/peer.hpp"

#include <algorithm>
#include <cassert>

namespace lockss::protocol {

namespace {

template <class... Fs>
struct Overload : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overload(Fs...) -> Overload<Fs...>;

bool is_inner_affirmative(const Invitee& inv) { return !inv.outer && inv.status == InviteeStatus::Affirmative; }

}  // namespace

const char* message_name(const PollMessage& m)
{
    return std::visit(Overload{[](const PollMsg&) { return "Poll"; },
                               [](const PollChallengeMsg&) { return "PollChallenge"; },
                               [](const PollProofMsg&) { return "PollProof"; },
                               [](const NominateMsg&) { return "Nominate"; },
                               [](const VoteMsg&) { return "Vote"; },
                               [](const RepairRequestMsg&) { return "RepairRequest"; },
                               [](const RepairMsg&) { return "Repair"; }},
                      m);
}

Invitee* PollRecord::find(PeerId p)
{
    for (auto& inv : invitees)
        if (inv.peer == p) return &inv;
    return nullptr;
}

std::size_t PollRecord::count(InviteeStatus s, bool outer) const
{
    return static_cast<std::size_t>(std::count_if(invitees.begin(), invitees.end(), [&](const Invitee& inv) {
        return inv.outer == outer && inv.status == s;
    }));
}

InnerTally tally_inner(const PollRecord& poll)
{
    InnerTally t;
    for (const auto& inv : poll.invitees) {
        if (!is_inner_affirmative(inv) || !inv.vote) continue;
        if (inv.verdict == effort::Verdict::Invalid) continue;
        ++t.valid;
        if (inv.verdict == effort::Verdict::Agreeing) ++t.agreeing;
        if (inv.ever_agreed) ++t.ever_agreed;
    }
    return t;
}

LoyalPeer::LoyalPeer(PeerId id, std::vector<PeerId> friends, std::shared_ptr<const PeerConfig> config, Rng rng)
    : cfg_(std::move(config)), rng_(std::move(rng))
{
    state_.id = id;
    state_.friends = std::move(friends);
    state_.reference_list = ReferenceList(id);
}

void LoyalPeer::start(Environment& env)
{
    bootstrap(state_, cfg_->protocol, env.now(), rng_);
    schedule_refresh(env, state_.refresh_deadline);
    mark_quorate(env);
    env.reference_list_changed(state_.id);
}

void LoyalPeer::damage(Environment& env, AuVersion replacement)
{
    const AuVersion before = state_.au;
    state_.au = replacement;
    env.au_changed(state_.id, before, replacement);
}

void LoyalPeer::on_message(Environment& env, PeerId from, PollMessage msg)
{
    std::visit(Overload{[&](PollMsg& m) { on_invitation(env, from, m); },
                        [&](PollChallengeMsg& m) { on_challenge(env, from, m); },
                        [&](PollProofMsg& m) { on_proof(env, from, m); },
                        [&](NominateMsg& m) { on_nominate(env, from, std::move(m)); },
                        [&](VoteMsg& m) { on_vote(env, from, std::move(m)); },
                        [&](RepairRequestMsg& m) { on_repair_request(env, from, m); },
                        [&](RepairMsg& m) { on_repair(env, from, std::move(m)); }},
               msg);
}

void LoyalPeer::on_timer(Environment& env, const TimerTag& tag)
{
    switch (tag.kind) {
    case TimerKind::Refresh:
        if (tag.generation != refresh_generation_) return;
        if (state_.busy == Commitment::Voting)
            wants_poll_ = true;
        else if (state_.busy == Commitment::Idle)
            call_poll(env);
        return;
    case TimerKind::InterPoll:
        if (tag.generation != interpoll_generation_) return;
        if (auto alarm = check_interpoll_alarm(state_, env.now(), cfg_->protocol)) env.raise_alarm(*alarm);
        env.set_timer(state_.id, env.now() + cfg_->protocol.interpoll_alarm_factor * cfg_->protocol.mean_interval,
                      {TimerKind::InterPoll, {}, interpoll_generation_});
        return;
    case TimerKind::Effort:
        if (voting_ && voting_->poll == tag.poll && !voting_->proof_received) end_commitment(env);
        return;
    default: break;
    }
    if (!poll_ || poll_->id != tag.poll) return;
    switch (tag.kind) {
    case TimerKind::Challenge:
        if (tag.generation != poll_->round) return;
        if (poll_->phase == Phase::AwaitingChallenges)
            process_challenges(env, false);
        else if (poll_->phase == Phase::OuterChallenges)
            process_challenges(env, true);
        return;
    case TimerKind::Nomination:
        if (poll_->phase == Phase::AwaitingNominations) form_outer(env);
        return;
    case TimerKind::Vote:
        if (poll_->phase == Phase::AwaitingVotes) begin_verification(env);
        return;
    case TimerKind::Repair:
        if (poll_->phase == Phase::Repairing && tag.generation == poll_->repair_requests && !poll_->offered_repair)
            try_repair(env);
        return;
    default: return;
    }
}

void LoyalPeer::on_compute(Environment& env, const ComputeTag& tag)
{
    switch (tag.kind) {
    case ComputeKind::VerifyPollProof: {
        if (!voting_ || voting_->poll != tag.poll) return;
        if (!effort::poll_effort_verify(voting_->poll, voting_->challenge, voting_->proof, cfg_->effort)) {
            end_commitment(env);
            return;
        }
        NominateMsg nom{voting_->poll, {}};
        nom.nominations = choose_invitees(state_.reference_list, cfg_->protocol.nominations, {voting_->initiator}, rng_);
        env.send(state_.id, voting_->initiator, std::move(nom));
        env.start_compute(state_.id, cfg_->costs.vote_construct, {ComputeKind::ConstructVote, voting_->poll, 0});
        return;
    }
    case ComputeKind::ConstructVote: {
        if (!voting_ || voting_->poll != tag.poll) return;
        auto built = effort::construct_vote(voting_->challenge, voting_->poll, state_.id, env.content(state_.au),
                                            cfg_->effort);
        state_.voted_in.insert(voting_->initiator);
        env.send(state_.id, voting_->initiator, VoteMsg{voting_->poll, std::move(built.vote)});
        end_commitment(env);
        return;
    }
    default: break;
    }
    if (!poll_ || poll_->id != tag.poll) return;
    switch (tag.kind) {
    case ComputeKind::PollProof: {
        auto& inv = poll_->invitees.at(tag.arg);
        env.send(state_.id, inv.peer,
                 PollProofMsg{poll_->id, effort::poll_effort_prove(poll_->id, inv.challenge, cfg_->effort)});
        inv.proof_sent = true;
        start_next_proof(env);
        return;
    }
    case ComputeKind::VerifyVotes: votes_verified(env); return;
    case ComputeKind::VerifyRepair: repair_verified(env); return;
    default: return;
    }
}

// ---- initiator ----

void LoyalPeer::call_poll(Environment& env)
{
    assert(state_.busy == Commitment::Idle);
    wants_poll_ = false;
    ++state_.poll_counter;
    state_.busy = Commitment::Polling;
    poll_.emplace();
    poll_->id = PollId{rng_()};
    poll_->started = env.now();
    poll_->au_at_start = state_.au;
    if (state_.reference_list.empty()) {
        abort_poll(env);
        return;
    }
    invite(env, choose_invitees(state_.reference_list, cfg_->protocol.inner_size, {}, rng_), false);
}

void LoyalPeer::invite(Environment& env, const std::vector<PeerId>& peers, bool outer)
{
    auto& poll = *poll_;
    ++poll.round;
    poll.pending = peers.size();
    for (PeerId p : peers) {
        Invitee inv;
        inv.peer = p;
        inv.outer = outer;
        poll.invitees.push_back(std::move(inv));
        env.send(state_.id, p, PollMsg{poll.id, random_digest(rng_)});
    }
    if (peers.empty()) {
        process_challenges(env, outer);
        return;
    }
    env.set_timer(state_.id, env.now() + cfg_->timing.challenge, {TimerKind::Challenge, poll.id, poll.round});
}

void LoyalPeer::on_challenge(Environment& env, PeerId from, const PollChallengeMsg& m)
{
    if (!poll_ || poll_->id != m.poll) return;
    auto& poll = *poll_;
    Invitee* inv = poll.find(from);
    if (!inv) return;
    const bool collecting = poll.phase == Phase::AwaitingChallenges || poll.phase == Phase::OuterChallenges;
    if (inv->status == InviteeStatus::Pending) {
        inv->challenge = m.challenge;
        inv->status = m.yes ? InviteeStatus::Affirmative : InviteeStatus::Negative;
        if (poll.pending > 0) --poll.pending;
        if (poll.pending == 0 && collecting) process_challenges(env, poll.phase == Phase::OuterChallenges);
        return;
    }
    const bool answered = inv->status == InviteeStatus::Affirmative || inv->status == InviteeStatus::Negative;
    if (collecting && answered && !inv->proof_sent) {
        const bool was_yes = inv->status == InviteeStatus::Affirmative;
        if (m.challenge != inv->challenge || m.yes != was_yes) {
            inv->status = InviteeStatus::Discredited;
            ++poll.discredit_count;
        }
    }
}

void LoyalPeer::process_challenges(Environment& env, bool outer)
{
    auto& poll = *poll_;
    for (auto& inv : poll.invitees)
        if (inv.outer == outer && inv.status == InviteeStatus::Pending) inv.status = InviteeStatus::NoResponse;
    poll.pending = 0;

    if (poll.discredit_count > cfg_->protocol.max_discredited) {
        env.raise_alarm({AlarmKind::LocalSpoofing, state_.id, env.now(), poll.id});
        for (auto& inv : poll.invitees) {
            const bool waiting = inv.status == InviteeStatus::Affirmative || inv.status == InviteeStatus::Negative;
            if (waiting && !inv.proof_sent) {
                env.send(state_.id, inv.peer, PollProofMsg{poll.id, random_digest(rng_)});
                inv.proof_sent = true;
            }
        }
        poll.phase = Phase::Alarmed;
        conclude(env, Tally::Inconclusive, false);
        return;
    }

    if (!outer) {
        const std::size_t aff = poll.count(InviteeStatus::Affirmative, false);
        if (aff < cfg_->protocol.quorum) {
            std::unordered_set<PeerId> invited;
            for (const auto& inv : poll.invitees) invited.insert(inv.peer);
            auto more = choose_invitees(state_.reference_list, cfg_->protocol.inner_size - aff, invited, rng_);
            if (!more.empty()) {
                invite(env, more, false);
                return;
            }
            abort_poll(env);
            return;
        }
        poll.phase = Phase::ComputingProofs;
    } else {
        poll.phase = Phase::OuterProofs;
    }
    poll.proof_queue.clear();
    for (std::size_t k = 0; k < poll.invitees.size(); ++k) {
        auto& inv = poll.invitees[k];
        if (inv.outer != outer || inv.proof_sent) continue;
        if (inv.status == InviteeStatus::Negative) {
            env.send(state_.id, inv.peer, PollProofMsg{poll.id, random_digest(rng_)});
            inv.proof_sent = true;
        } else if (inv.status == InviteeStatus::Affirmative) {
            poll.proof_queue.push_back(k);
        }
    }
    std::reverse(poll.proof_queue.begin(), poll.proof_queue.end());
    start_next_proof(env);
}

void LoyalPeer::start_next_proof(Environment& env)
{
    auto& poll = *poll_;
    if (poll.proof_queue.empty()) {
        proofs_done(env);
        return;
    }
    const std::size_t k = poll.proof_queue.back();
    poll.proof_queue.pop_back();
    env.start_compute(state_.id, cfg_->costs.poll_effort_construct, {ComputeKind::PollProof, poll.id, k});
}

void LoyalPeer::proofs_done(Environment& env)
{
    auto& poll = *poll_;
    if (poll.phase == Phase::ComputingProofs) {
        poll.phase = Phase::AwaitingNominations;
        env.set_timer(state_.id, env.now() + cfg_->timing.nomination, {TimerKind::Nomination, poll.id, 0});
        const bool all = std::all_of(poll.invitees.begin(), poll.invitees.end(), [](const Invitee& inv) {
            return !is_inner_affirmative(inv) || inv.nominated;
        });
        if (all) form_outer(env);
    } else if (poll.phase == Phase::OuterProofs) {
        poll.phase = Phase::AwaitingVotes;
        env.set_timer(state_.id, env.now() + cfg_->timing.vote, {TimerKind::Vote, poll.id, 0});
        maybe_all_votes(env);
    }
}

void LoyalPeer::on_nominate(Environment& env, PeerId from, NominateMsg m)
{
    if (!poll_ || poll_->id != m.poll) return;
    auto& poll = *poll_;
    Invitee* inv = poll.find(from);
    if (!inv || !is_inner_affirmative(*inv) || !inv->proof_sent || inv->nominated) return;
    inv->nominated = true;
    inv->nominations = std::move(m.nominations);
    if (poll.phase != Phase::AwaitingNominations) return;
    const bool all = std::all_of(poll.invitees.begin(), poll.invitees.end(),
                                 [](const Invitee& i) { return !is_inner_affirmative(i) || i.nominated; });
    if (all) form_outer(env);
}

void LoyalPeer::form_outer(Environment& env)
{
    auto& poll = *poll_;
    std::vector<std::vector<PeerId>> lists;
    std::unordered_set<PeerId> invited;
    for (const auto& inv : poll.invitees) {
        invited.insert(inv.peer);
        if (is_inner_affirmative(inv) && inv.nominated) lists.push_back(inv.nominations);
    }
    auto outer = form_outer_circle(lists, state_.reference_list, invited, cfg_->protocol, rng_);
    if (outer.empty()) {
        poll.phase = Phase::AwaitingVotes;
        env.set_timer(state_.id, env.now() + cfg_->timing.vote, {TimerKind::Vote, poll.id, 0});
        maybe_all_votes(env);
        return;
    }
    poll.phase = Phase::OuterChallenges;
    invite(env, outer, true);
}

void LoyalPeer::on_vote(Environment& env, PeerId from, VoteMsg m)
{
    if (!poll_ || poll_->id != m.poll) return;
    auto& poll = *poll_;
    if (poll.phase == Phase::Tabulating || poll.phase == Phase::Repairing) return;
    Invitee* inv = poll.find(from);
    if (!inv || !inv->proof_sent || inv->vote) return;
    inv->vote = std::move(m.vote);
    if (poll.phase == Phase::AwaitingVotes) maybe_all_votes(env);
}

void LoyalPeer::maybe_all_votes(Environment& env)
{
    auto& poll = *poll_;
    for (const auto& inv : poll.invitees) {
        const bool expected = inv.proof_sent &&
                              (inv.status == InviteeStatus::Affirmative || inv.status == InviteeStatus::Negative);
        if (expected && !inv.vote) return;
    }
    begin_verification(env);
}

void LoyalPeer::begin_verification(Environment& env)
{
    auto& poll = *poll_;
    poll.phase = Phase::Tabulating;
    const auto& content = env.content(state_.au);
    double cost = 0.0;
    for (auto& inv : poll.invitees) {
        if (!inv.vote) continue;
        auto r = effort::verify_vote(*inv.vote, content, inv.challenge, poll.id, cfg_->effort);
        inv.verdict = r.verdict;
        inv.ever_agreed = r.verdict == effort::Verdict::Agreeing;
        cost += r.cost;
    }
    env.start_compute(state_.id, cost, {ComputeKind::VerifyVotes, poll.id, 0});
}

void LoyalPeer::votes_verified(Environment& env)
{
    auto& poll = *poll_;
    bool changed = false;
    for (const auto& inv : poll.invitees) {
        if (inv.status != InviteeStatus::Affirmative || !inv.vote) continue;
        if (inv.verdict == effort::Verdict::Invalid) changed |= state_.reference_list.erase(inv.peer);
    }
    if (changed) env.reference_list_changed(state_.id);
    decide(env);
}

std::vector<PeerId> LoyalPeer::agreeing_voters(bool include_outer) const
{
    std::vector<PeerId> out;
    for (const auto& inv : poll_->invitees) {
        if (inv.status != InviteeStatus::Affirmative || !inv.vote) continue;
        if (inv.outer && !include_outer) continue;
        if (inv.verdict == effort::Verdict::Agreeing) out.push_back(inv.peer);
    }
    return out;
}

void LoyalPeer::decide(Environment& env)
{
    auto& poll = *poll_;
    const auto t = tally_inner(poll);
    const Tally tally = tabulate(t.valid, t.agreeing, cfg_->protocol);
    if (tally != Tally::NoQuorum) mark_quorate(env);

    switch (tally) {
    case Tally::LandslideWin: {
        for (PeerId p : agreeing_voters(true)) state_.vote_history[p] = HistoryEntry{poll.id, state_.au.id};
        std::vector<InnerVote> inner;
        std::vector<PeerId> outer;
        for (const auto& inv : poll.invitees) {
            if (inv.status != InviteeStatus::Affirmative || !inv.vote || inv.verdict == effort::Verdict::Invalid)
                continue;
            if (inv.outer) {
                if (inv.verdict == effort::Verdict::Agreeing) outer.push_back(inv.peer);
            } else {
                inner.push_back({inv.peer, inv.verdict});
            }
        }
        update_reference_list(state_, inner, outer, cfg_->protocol, rng_);
        env.reference_list_changed(state_.id);
        poll.phase = Phase::Concluded;
        conclude(env, tally, false);
        return;
    }
    case Tally::LandslideLoss: {
        poll.phase = Phase::Repairing;
        poll.repair_candidates.clear();
        for (std::size_t k = 0; k < poll.invitees.size(); ++k) {
            const auto& inv = poll.invitees[k];
            if (!is_inner_affirmative(inv) || !inv.vote || inv.verdict != effort::Verdict::Disagreeing) continue;
            if (cfg_->protocol.known_repairers_only && !state_.voted_in.contains(inv.peer)) continue;
            poll.repair_candidates.push_back(k);
        }
        std::shuffle(poll.repair_candidates.begin(), poll.repair_candidates.end(), rng_);
        try_repair(env);
        return;
    }
    case Tally::Inconclusive:
        env.raise_alarm({AlarmKind::InconclusivePoll, state_.id, env.now(), poll.id});
        poll.phase = Phase::Alarmed;
        conclude(env, tally, false);
        return;
    case Tally::NoQuorum: {
        update_reference_list_no_quorum(state_, agreeing_voters(true));
        env.reference_list_changed(state_.id);
        poll.phase = Phase::Concluded;
        conclude(env, tally, false);
        return;
    }
    }
}

void LoyalPeer::try_repair(Environment& env)
{
    auto& poll = *poll_;
    poll.offered_repair.reset();
    poll.repair_supplier.reset();
    if (poll.repair_attempts >= cfg_->protocol.max_minority || poll.repair_candidates.empty()) {
        // Nobody repaired us: no decision on the AU, keep the agreeing voters.
        update_reference_list_no_quorum(state_, agreeing_voters(true));
        env.reference_list_changed(state_.id);
        poll.phase = Phase::Concluded;
        conclude(env, Tally::LandslideLoss, false);
        return;
    }
    const std::size_t k = poll.repair_candidates.back();
    poll.repair_candidates.pop_back();
    ++poll.repair_requests;
    poll.repair_supplier = k;
    env.send(state_.id, poll.invitees[k].peer, RepairRequestMsg{poll.id});
    env.set_timer(state_.id, env.now() + cfg_->timing.repair, {TimerKind::Repair, poll.id, poll.repair_requests});
}

void LoyalPeer::on_repair(Environment& env, PeerId from, RepairMsg m)
{
    if (!poll_ || poll_->id != m.poll) return;
    auto& poll = *poll_;
    if (poll.phase != Phase::Repairing || !poll.repair_supplier || poll.offered_repair) return;
    const auto& supplier = poll.invitees[*poll.repair_supplier];
    if (supplier.peer != from) return;
    poll.offered_repair = m.au;
    ++poll.repair_attempts;
    // Checking the supplier's vote against the offered AU, then every valid vote.
    const auto& content = env.content(m.au);
    double cost = 0.0;
    for (const auto& inv : poll.invitees) {
        if (inv.status != InviteeStatus::Affirmative || !inv.vote || inv.verdict == effort::Verdict::Invalid) continue;
        cost += effort::verify_vote(*inv.vote, content, inv.challenge, poll.id, cfg_->effort).cost;
    }
    env.start_compute(state_.id, cost, {ComputeKind::VerifyRepair, poll.id, *poll.repair_supplier});
}

void LoyalPeer::repair_verified(Environment& env)
{
    auto& poll = *poll_;
    if (!poll.offered_repair || !poll.repair_supplier) return;
    const AuVersion offered = *poll.offered_repair;
    const auto& content = env.content(offered);
    auto& supplier = poll.invitees[*poll.repair_supplier];
    const auto check = effort::verify_vote(*supplier.vote, content, supplier.challenge, poll.id, cfg_->effort);
    if (check.verdict != effort::Verdict::Agreeing) {
        if (state_.reference_list.erase(supplier.peer)) env.reference_list_changed(state_.id);
        try_repair(env);
        return;
    }
    const AuVersion before = state_.au;
    state_.au = offered;
    poll.repaired = true;
    env.au_changed(state_.id, before, offered);
    for (auto& inv : poll.invitees) {
        if (inv.status != InviteeStatus::Affirmative || !inv.vote || inv.verdict == effort::Verdict::Invalid) continue;
        inv.verdict = effort::verify_vote(*inv.vote, content, inv.challenge, poll.id, cfg_->effort).verdict;
        if (inv.verdict == effort::Verdict::Agreeing) inv.ever_agreed = true;
    }
    const auto t = tally_inner(poll);
    const Tally tally = tabulate(t.valid, t.agreeing, cfg_->protocol);
    if (tally == Tally::LandslideWin) {
        decide(env);
        return;
    }
    if (t.ever_agreed > cfg_->protocol.max_minority) {
        env.raise_alarm({AlarmKind::InconclusivePoll, state_.id, env.now(), poll.id});
        poll.phase = Phase::Alarmed;
        conclude(env, Tally::Inconclusive, false);
        return;
    }
    try_repair(env);
}

void LoyalPeer::abort_poll(Environment& env)
{
    auto& poll = *poll_;
    for (auto& inv : poll.invitees) {
        const bool waiting = inv.status == InviteeStatus::Affirmative || inv.status == InviteeStatus::Negative;
        if (waiting && !inv.proof_sent) {
            env.send(state_.id, inv.peer, PollProofMsg{poll.id, random_digest(rng_)});
            inv.proof_sent = true;
        }
    }
    if (state_.reference_list.empty()) {
        for (PeerId f : state_.friends) state_.reference_list.insert(f, state_.poll_counter);
        env.reference_list_changed(state_.id);
    }
    poll.phase = Phase::Concluded;
    conclude(env, Tally::NoQuorum, true);
}

void LoyalPeer::conclude(Environment& env, Tally tally, bool aborted)
{
    PollOutcome out;
    out.initiator = state_.id;
    out.poll = poll_->id;
    out.started = poll_->started;
    out.finished = env.now();
    out.tally = tally;
    out.aborted = aborted;
    out.repaired = poll_->repaired;
    const auto t = tally_inner(*poll_);
    out.valid_votes = t.valid;
    out.agreeing = t.agreeing;
    out.au_before = poll_->au_at_start;
    out.au_after = state_.au;
    poll_.reset();
    state_.busy = Commitment::Idle;

    const SimTime now = env.now();
    if (aborted)
        schedule_refresh(env, now + cfg_->protocol.abort_retry_delay);
    else if (tally == Tally::NoQuorum)
        schedule_refresh(env, now);
    else
        schedule_refresh(env, now + sample_interval(cfg_->protocol, rng_));
    env.poll_concluded(out);
}

void LoyalPeer::schedule_refresh(Environment& env, SimTime at)
{
    ++refresh_generation_;
    state_.refresh_deadline = at;
    env.set_timer(state_.id, at, {TimerKind::Refresh, {}, refresh_generation_});
}

void LoyalPeer::mark_quorate(Environment& env)
{
    state_.last_quorate_poll_time = env.now();
    ++interpoll_generation_;
    // Fire just past the threshold; the alarm test is strict.
    env.set_timer(state_.id,
                  env.now() + cfg_->protocol.interpoll_alarm_factor * cfg_->protocol.mean_interval + 1.0,
                  {TimerKind::InterPoll, {}, interpoll_generation_});
}

// ---- voter ----

void LoyalPeer::on_invitation(Environment& env, PeerId from, const PollMsg& m)
{
    const SimTime now = env.now();
    std::erase_if(declined_, [now](const Declined& d) { return d.expires <= now; });
    PollChallengeMsg reply{m.poll, random_digest(rng_), random_digest(rng_), false};
    if (accepts_invitation(state_, wants_poll_, now)) {
        reply.yes = true;
        state_.busy = Commitment::Voting;
        voting_ = Voting{from, m.poll, reply.challenge, {}, false};
        env.set_timer(state_.id, now + cfg_->timing.effort, {TimerKind::Effort, m.poll, 0});
    } else {
        declined_.push_back({from, m.poll, now + cfg_->timing.effort});
    }
    env.send(state_.id, from, reply);
}

void LoyalPeer::on_proof(Environment& env, PeerId from, const PollProofMsg& m)
{
    if (voting_ && voting_->poll == m.poll && voting_->initiator == from) {
        if (voting_->proof_received) return;
        voting_->proof_received = true;
        voting_->proof = m.proof;
        env.start_compute(state_.id, cfg_->costs.poll_effort_verify, {ComputeKind::VerifyPollProof, m.poll, 0});
        return;
    }
    auto it = std::find_if(declined_.begin(), declined_.end(),
                           [&](const Declined& d) { return d.poll == m.poll && d.initiator == from; });
    if (it == declined_.end()) return;
    declined_.erase(it);
    env.send(state_.id, from, VoteMsg{m.poll, effort::make_bogus_vote(m.poll, state_.id, cfg_->vote_rounds, rng_)});
}

void LoyalPeer::end_commitment(Environment& env)
{
    voting_.reset();
    state_.busy = Commitment::Idle;
    if (wants_poll_) call_poll(env);
}

void LoyalPeer::on_repair_request(Environment& env, PeerId from, const RepairRequestMsg& m)
{
    if (should_supply_repair(state_, from)) env.send(state_.id, from, RepairMsg{m.poll, state_.au});
}

}  // namespace lockss::protocol
