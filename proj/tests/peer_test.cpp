#include "lockss/peer.hpp"
#include "lockss/world.hpp"

#include <gtest/gtest.h>

#include <deque>
#include <map>

using namespace lockss;
using namespace lockss::protocol;

namespace {

struct Sent {
    PeerId from, to;
    PollMessage msg;
};

// Records everything the peer asks of its environment; the test plays the network.
class FakeEnv : public Environment {
public:
    SimTime t = 0;
    std::vector<Sent> sent;
    std::deque<ComputeTag> computes;
    std::vector<double> compute_units;
    std::vector<std::pair<SimTime, TimerTag>> timers;
    std::vector<Alarm> alarms;
    std::vector<PollOutcome> outcomes;
    std::map<std::uint64_t, effort::AuContent> cache;
    effort::EffortParams effort;

    SimTime now() const override { return t; }
    void send(PeerId from, PeerId to, PollMessage msg) override { sent.push_back({from, to, std::move(msg)}); }
    SimTime start_compute(PeerId, double units, ComputeTag tag) override
    {
        computes.push_back(tag);
        compute_units.push_back(units);
        return t + effort.seconds(units);
    }
    void set_timer(PeerId, SimTime at, TimerTag tag) override { timers.emplace_back(at, tag); }
    void raise_alarm(const Alarm& a) override { alarms.push_back(a); }
    void poll_concluded(const PollOutcome& o) override { outcomes.push_back(o); }
    void reference_list_changed(PeerId) override {}
    void au_changed(PeerId, AuVersion, AuVersion) override {}
    const effort::AuContent& content(const AuVersion& au) override
    {
        auto it = cache.find(au.id);
        if (it == cache.end()) it = cache.emplace(au.id, effort::make_content(au.id, effort.blocks)).first;
        return it->second;
    }

    template <class M>
    std::vector<std::pair<PeerId, M>> take(PeerId from)
    {
        std::vector<std::pair<PeerId, M>> out;
        std::vector<Sent> rest;
        for (auto& s : sent) {
            if (s.from == from && std::holds_alternative<M>(s.msg))
                out.emplace_back(s.to, std::get<M>(s.msg));
            else
                rest.push_back(std::move(s));
        }
        sent = std::move(rest);
        return out;
    }

    std::optional<TimerTag> last_timer(TimerKind k) const
    {
        for (auto it = timers.rbegin(); it != timers.rend(); ++it)
            if (it->second.kind == k) return it->second;
        return std::nullopt;
    }
};

constexpr AuVersion kDamaged{77, AuKind::RandomDamage};
constexpr AuVersion kOther{78, AuKind::Bogus};

std::shared_ptr<const PeerConfig> config()
{
    sim::WorldConfig w;
    return sim::make_peer_config(w);
}

std::vector<PeerId> ids(std::uint32_t lo, std::uint32_t hi)
{
    std::vector<PeerId> v;
    for (std::uint32_t i = lo; i < hi; ++i) v.push_back(PeerId{i});
    return v;
}

void run_computes(LoyalPeer& p, FakeEnv& env)
{
    while (!env.computes.empty()) {
        const ComputeTag tag = env.computes.front();
        env.computes.pop_front();
        p.on_compute(env, tag);
    }
}

// Drives a peer's own poll by hand: invitations, challenges, proofs, votes.
struct PollDriver {
    LoyalPeer& peer;
    FakeEnv& env;
    std::map<PeerId, Digest> challenges;
    PollId poll;

    std::vector<PeerId> open()
    {
        const auto refresh = env.last_timer(TimerKind::Refresh);
        EXPECT_TRUE(refresh.has_value());
        peer.on_timer(env, *refresh);
        auto invites = env.take<PollMsg>(peer.state().id);
        std::vector<PeerId> out;
        for (auto& [to, m] : invites) {
            poll = m.poll;
            out.push_back(to);
        }
        return out;
    }

    void answer(const std::vector<PeerId>& who, bool yes)
    {
        for (PeerId v : who) {
            Digest c{};
            c[0] = static_cast<std::uint8_t>(v.value);
            c[1] = yes ? 1 : 0;
            challenges[v] = c;
            peer.on_message(env, v, PollChallengeMsg{poll, {}, c, yes});
        }
    }

    void proofs_and_no_nominations()
    {
        run_computes(peer, env);
        env.take<PollProofMsg>(peer.state().id);
        peer.on_timer(env, TimerTag{TimerKind::Nomination, poll, 0});
    }

    void votes(const std::vector<PeerId>& who, const std::function<AuVersion(PeerId)>& vote_of)
    {
        for (PeerId v : who) {
            auto built = effort::construct_vote(challenges.at(v), poll, v, env.content(vote_of(v)), env.effort);
            peer.on_message(env, v, VoteMsg{poll, std::move(built.vote)});
        }
        run_computes(peer, env);
    }
};

struct Fixture : ::testing::Test {
    FakeEnv env;
    std::shared_ptr<const PeerConfig> cfg = config();

    std::unique_ptr<LoyalPeer> make(std::uint32_t id, std::vector<PeerId> friends)
    {
        auto p = std::make_unique<LoyalPeer>(PeerId{id}, std::move(friends), cfg, Rng(id + 1));
        p->start(env);
        return p;
    }
};

using VoterTest = Fixture;
using InitiatorTest = Fixture;

}  // namespace

TEST_F(VoterTest, IdleAcceptsAndVotes)
{
    auto p = make(1, ids(100, 129));
    const PollId poll{42};
    p->on_message(env, PeerId{500}, PollMsg{poll, {}});
    auto replies = env.take<PollChallengeMsg>(PeerId{1});
    ASSERT_EQ(replies.size(), 1u);
    EXPECT_TRUE(replies[0].second.yes);
    EXPECT_EQ(p->state().busy, Commitment::Voting);

    const Digest proof = effort::poll_effort_prove(poll, replies[0].second.challenge, cfg->effort);
    p->on_message(env, PeerId{500}, PollProofMsg{poll, proof});
    ASSERT_EQ(env.computes.size(), 1u);
    EXPECT_DOUBLE_EQ(env.compute_units.back(), cfg->costs.poll_effort_verify);
    run_computes(*p, env);
    EXPECT_DOUBLE_EQ(env.compute_units.back(), cfg->costs.vote_construct);
    EXPECT_EQ(env.take<NominateMsg>(PeerId{1}).size(), 1u);
    auto votes = env.take<VoteMsg>(PeerId{1});
    ASSERT_EQ(votes.size(), 1u);
    const auto check = effort::verify_vote(votes[0].second.vote, env.content(kGoodAu), replies[0].second.challenge,
                                           poll, cfg->effort);
    EXPECT_EQ(check.verdict, effort::Verdict::Agreeing);
    EXPECT_EQ(p->state().busy, Commitment::Idle);
    EXPECT_TRUE(p->state().voted_in.contains(PeerId{500}));
}

TEST_F(VoterTest, BusyDeclines)
{
    auto p = make(1, ids(100, 129));
    p->on_message(env, PeerId{500}, PollMsg{PollId{1}, {}});
    p->on_message(env, PeerId{501}, PollMsg{PollId{2}, {}});
    auto replies = env.take<PollChallengeMsg>(PeerId{1});
    ASSERT_EQ(replies.size(), 2u);
    EXPECT_TRUE(replies[0].second.yes);
    EXPECT_FALSE(replies[1].second.yes);
}

TEST_F(VoterTest, DeclinerAnswersProofWithBogusVote)
{
    auto p = make(1, ids(100, 129));
    p->on_message(env, PeerId{500}, PollMsg{PollId{1}, {}});
    p->on_message(env, PeerId{501}, PollMsg{PollId{2}, {}});
    auto replies = env.take<PollChallengeMsg>(PeerId{1});
    p->on_message(env, PeerId{501}, PollProofMsg{PollId{2}, {}});
    auto votes = env.take<VoteMsg>(PeerId{1});
    ASSERT_EQ(votes.size(), 1u);
    const auto check = effort::verify_vote(votes[0].second.vote, env.content(kGoodAu), replies[1].second.challenge,
                                           PollId{2}, cfg->effort);
    EXPECT_EQ(check.verdict, effort::Verdict::Invalid);
}

TEST_F(VoterTest, PastDeadlineDeclinesThenPolls)
{
    auto p = make(1, ids(100, 129));
    env.t = p->state().refresh_deadline + 1.0;
    p->on_message(env, PeerId{500}, PollMsg{PollId{1}, {}});
    auto replies = env.take<PollChallengeMsg>(PeerId{1});
    ASSERT_EQ(replies.size(), 1u);
    EXPECT_FALSE(replies[0].second.yes);
    p->on_timer(env, *env.last_timer(TimerKind::Refresh));
    EXPECT_EQ(p->state().busy, Commitment::Polling);
    EXPECT_EQ(env.take<PollMsg>(PeerId{1}).size(), cfg->protocol.inner_size);
}

TEST_F(VoterTest, RefreshWhileVotingWaitsForCommitment)
{
    auto p = make(1, ids(100, 129));
    p->on_message(env, PeerId{500}, PollMsg{PollId{9}, {}});
    env.take<PollChallengeMsg>(PeerId{1});
    env.t = p->state().refresh_deadline;
    p->on_timer(env, *env.last_timer(TimerKind::Refresh));
    EXPECT_EQ(p->state().busy, Commitment::Voting);
    EXPECT_TRUE(env.take<PollMsg>(PeerId{1}).empty());
    // the proof never comes; the effort timer releases the voter
    p->on_timer(env, TimerTag{TimerKind::Effort, PollId{9}, 0});
    EXPECT_EQ(p->state().busy, Commitment::Polling);
    EXPECT_FALSE(env.take<PollMsg>(PeerId{1}).empty());
}

TEST_F(InitiatorTest, LandslideWinUpdatesList)
{
    auto p = make(1, ids(100, 140));
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    ASSERT_EQ(inv.size(), 20u);
    d.answer(inv, true);
    EXPECT_EQ(env.computes.size(), 1u);  // proofs go out one at a time
    d.proofs_and_no_nominations();
    d.votes(inv, [](PeerId) { return kGoodAu; });
    ASSERT_EQ(env.outcomes.size(), 1u);
    EXPECT_EQ(env.outcomes[0].tally, Tally::LandslideWin);
    EXPECT_EQ(env.outcomes[0].valid_votes, 20u);
    EXPECT_TRUE(env.alarms.empty());
    // Q agreeing voters leave, the others stay refreshed; churn may bring up
    // to 3 of the leavers straight back as friends
    std::size_t kept = 0;
    for (PeerId v : inv) kept += p->state().reference_list.contains(v);
    EXPECT_GE(kept, 10u);
    EXPECT_LE(kept, 13u);
    for (PeerId v : inv) EXPECT_TRUE(p->state().vote_history.contains(v));
    EXPECT_EQ(p->state().busy, Commitment::Idle);
}

TEST_F(InitiatorTest, FourDiscreditedRaiseSpoofingAlarm)
{
    auto p = make(1, ids(100, 140));
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    const std::vector<PeerId> twisty(inv.begin(), inv.begin() + 4);
    const std::vector<PeerId> rest(inv.begin() + 4, inv.end());
    d.answer(twisty, true);
    for (PeerId v : twisty) {
        Digest other{};
        other[5] = 9;
        p->on_message(env, v, PollChallengeMsg{d.poll, {}, other, true});
    }
    d.answer(rest, true);
    ASSERT_EQ(env.alarms.size(), 1u);
    EXPECT_EQ(env.alarms[0].kind, AlarmKind::LocalSpoofing);
    ASSERT_EQ(env.outcomes.size(), 1u);
    EXPECT_EQ(env.outcomes[0].tally, Tally::Inconclusive);
}

TEST_F(InitiatorTest, ThreeDiscreditedTolerated)
{
    auto p = make(1, ids(100, 140));
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    const std::vector<PeerId> twisty(inv.begin(), inv.begin() + 3);
    const std::vector<PeerId> rest(inv.begin() + 3, inv.end());
    d.answer(twisty, true);
    for (PeerId v : twisty) p->on_message(env, v, PollChallengeMsg{d.poll, {}, Digest{}, false});
    d.answer(rest, true);
    EXPECT_TRUE(env.alarms.empty());
    EXPECT_EQ(p->current_poll()->phase, Phase::ComputingProofs);
}

TEST_F(InitiatorTest, EightAffirmativesTopUp)
{
    auto p = make(1, ids(100, 140));
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    d.answer(std::vector<PeerId>(inv.begin(), inv.begin() + 8), true);
    d.answer(std::vector<PeerId>(inv.begin() + 8, inv.end()), false);
    const auto more = env.take<PollMsg>(PeerId{1});
    EXPECT_EQ(more.size(), 12u);
    for (auto& [to, m] : more) {
        EXPECT_EQ(m.poll, d.poll);
        EXPECT_EQ(std::count(inv.begin(), inv.end(), to), 0);
    }
}

TEST_F(InitiatorTest, SmallListAborts)
{
    auto p = make(1, ids(100, 105));
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    ASSERT_EQ(inv.size(), 5u);
    d.answer(inv, true);
    ASSERT_EQ(env.outcomes.size(), 1u);
    EXPECT_TRUE(env.outcomes[0].aborted);
    EXPECT_NEAR(p->state().refresh_deadline - env.t, cfg->protocol.abort_retry_delay, 1e-9);
    // affirmatives are released with a proof they cannot use
    EXPECT_EQ(env.take<PollProofMsg>(PeerId{1}).size(), 5u);
}

TEST_F(InitiatorTest, SilentInviteesTimeOut)
{
    auto p = make(1, ids(100, 140));
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    d.answer(std::vector<PeerId>(inv.begin(), inv.begin() + 15), true);
    EXPECT_EQ(p->current_poll()->phase, Phase::AwaitingChallenges);
    p->on_timer(env, *env.last_timer(TimerKind::Challenge));
    EXPECT_EQ(p->current_poll()->phase, Phase::ComputingProofs);
    EXPECT_EQ(p->current_poll()->count(InviteeStatus::NoResponse, false), 5u);
}

TEST_F(InitiatorTest, InconclusiveRaisesAlarm)
{
    auto p = make(1, ids(100, 140));
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    d.answer(inv, true);
    d.proofs_and_no_nominations();
    d.votes(inv, [&](PeerId v) { return v.value % 2 ? kGoodAu : kOther; });
    ASSERT_EQ(env.alarms.size(), 1u);
    EXPECT_EQ(env.alarms[0].kind, AlarmKind::InconclusivePoll);
    EXPECT_EQ(env.outcomes.back().tally, Tally::Inconclusive);
}

TEST_F(InitiatorTest, LossRepairedFromKnownVoter)
{
    auto p = make(1, ids(100, 140));
    p->damage(env, kDamaged);
    p->mutable_state().voted_in.insert(PeerId{107});
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    if (std::count(inv.begin(), inv.end(), PeerId{107}) == 0) GTEST_SKIP() << "known repairer not invited";
    d.answer(inv, true);
    d.proofs_and_no_nominations();
    d.votes(inv, [](PeerId) { return kGoodAu; });
    auto reqs = env.take<RepairRequestMsg>(PeerId{1});
    ASSERT_EQ(reqs.size(), 1u);
    EXPECT_EQ(reqs[0].first, PeerId{107});
    p->on_message(env, PeerId{107}, RepairMsg{d.poll, kGoodAu});
    run_computes(*p, env);
    EXPECT_EQ(p->state().au, kGoodAu);
    ASSERT_EQ(env.outcomes.size(), 1u);
    EXPECT_EQ(env.outcomes[0].tally, Tally::LandslideWin);
    EXPECT_TRUE(env.outcomes[0].repaired);
}

TEST_F(InitiatorTest, MismatchedRepairDropsSupplier)
{
    auto p = make(1, ids(100, 140));
    p->damage(env, kDamaged);
    for (std::uint32_t v = 100; v < 140; ++v) p->mutable_state().voted_in.insert(PeerId{v});
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    d.answer(inv, true);
    d.proofs_and_no_nominations();
    d.votes(inv, [](PeerId) { return kGoodAu; });
    auto reqs = env.take<RepairRequestMsg>(PeerId{1});
    ASSERT_EQ(reqs.size(), 1u);
    const PeerId liar = reqs[0].first;
    p->on_message(env, liar, RepairMsg{d.poll, kOther});
    run_computes(*p, env);
    EXPECT_FALSE(p->state().reference_list.contains(liar));
    EXPECT_EQ(p->state().au, kDamaged);
    auto next = env.take<RepairRequestMsg>(PeerId{1});
    ASSERT_EQ(next.size(), 1u);
    EXPECT_NE(next[0].first, liar);
}

TEST_F(InitiatorTest, UnknownVotersNotAskedForRepair)
{
    auto p = make(1, ids(100, 140));
    p->damage(env, kDamaged);
    p->mutable_state().voted_in.clear();
    PollDriver d{*p, env, {}, {}};
    const auto inv = d.open();
    d.answer(inv, true);
    d.proofs_and_no_nominations();
    d.votes(inv, [](PeerId) { return kGoodAu; });
    EXPECT_TRUE(env.take<RepairRequestMsg>(PeerId{1}).empty());
    ASSERT_EQ(env.outcomes.size(), 1u);
    EXPECT_EQ(env.outcomes[0].tally, Tally::LandslideLoss);
    EXPECT_EQ(p->state().au, kDamaged);
}

TEST_F(VoterTest, RepairOnlyForPastAgreeingVoters)
{
    auto p = make(1, ids(100, 129));
    p->on_message(env, PeerId{105}, RepairRequestMsg{PollId{3}});
    auto r = env.take<RepairMsg>(PeerId{1});
    ASSERT_EQ(r.size(), 1u);  // friend: prior history
    EXPECT_EQ(r[0].second.au, kGoodAu);
    p->on_message(env, PeerId{900}, RepairRequestMsg{PollId{3}});
    EXPECT_TRUE(env.take<RepairMsg>(PeerId{1}).empty());
}
