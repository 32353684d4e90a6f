#include "lockss/protocol.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace lockss;
using namespace lockss::protocol;

namespace {

PeerId pid(std::uint32_t v) { return PeerId{v}; }

std::vector<PeerId> range_ids(std::uint32_t lo, std::uint32_t hi)
{
    std::vector<PeerId> out;
    for (std::uint32_t v = lo; v < hi; ++v) out.push_back(pid(v));
    return out;
}

PeerState with_list(std::uint32_t owner, const std::vector<PeerId>& members, std::uint64_t stamp = 0)
{
    PeerState s;
    s.id = pid(owner);
    s.reference_list = ReferenceList(s.id);
    for (PeerId p : members) s.reference_list.insert(p, stamp);
    return s;
}

bool no_duplicates_or_owner(const ReferenceList& list)
{
    std::set<std::uint32_t> seen;
    for (const auto& e : list.entries()) {
        if (e.peer == list.owner()) return false;
        if (!seen.insert(e.peer.value).second) return false;
    }
    return true;
}

// Straight from the decision bands, kept apart from the production code.
Tally three_band(std::size_t v, std::size_t agree, std::size_t q, std::size_t d)
{
    if (v < q) return Tally::NoQuorum;
    const std::size_t disagree = v - agree;
    if (disagree <= d) return Tally::LandslideWin;
    if (agree <= d) return Tally::LandslideLoss;
    return Tally::Inconclusive;
}

}  // namespace

TEST(ReferenceList, NeverHoldsOwnerOrDuplicates)
{
    ReferenceList l(pid(5));
    EXPECT_FALSE(l.insert(pid(5), 0));
    EXPECT_FALSE(l.upsert(pid(5), 0));
    EXPECT_TRUE(l.insert(pid(1), 0));
    EXPECT_FALSE(l.insert(pid(1), 3));
    EXPECT_EQ(l.find(pid(1))->time_inserted, 0u);
    EXPECT_FALSE(l.upsert(pid(1), 3));
    EXPECT_EQ(l.find(pid(1))->time_inserted, 3u);
    EXPECT_TRUE(l.upsert(pid(2), 3));
    EXPECT_EQ(l.size(), 2u);
    EXPECT_TRUE(l.erase(pid(1)));
    EXPECT_FALSE(l.erase(pid(1)));
    EXPECT_TRUE(no_duplicates_or_owner(l));
}

TEST(ReferenceList, AgeBound)
{
    PeerState s = with_list(0, {pid(1)}, 5);
    s.reference_list.insert(pid(2), 8);
    EXPECT_EQ(s.reference_list.drop_stale(10, 4), 1u);
    EXPECT_FALSE(s.reference_list.contains(pid(1)));
    EXPECT_TRUE(s.reference_list.contains(pid(2)));
}

TEST(Bootstrap, CopiesFriends)
{
    PeerState s;
    s.id = pid(9);
    s.friends = {pid(1), pid(2), pid(3)};
    s.poll_counter = 7;
    Rng rng(3);
    ProtocolParams p;
    bootstrap(s, p, 0.0, rng);
    ASSERT_EQ(s.reference_list.size(), 3u);
    for (const auto& e : s.reference_list.entries()) EXPECT_EQ(e.time_inserted, 7u);
    EXPECT_TRUE(s.reference_list.contains(pid(1)) && s.reference_list.contains(pid(2)) &&
                s.reference_list.contains(pid(3)));
}

TEST(Bootstrap, DeterministicDeadline)
{
    ProtocolParams p;
    PeerState a, b;
    a.id = b.id = pid(1);
    a.friends = b.friends = {pid(2)};
    Rng ra(11), rb(11);
    bootstrap(a, p, 100.0, ra);
    bootstrap(b, p, 100.0, rb);
    EXPECT_EQ(a.refresh_deadline, b.refresh_deadline);
}

TEST(Bootstrap, DeadlineMeanIsR)
{
    ProtocolParams p;
    p.stagger_first_poll = false;
    Rng rng(42);
    double sum = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        PeerState s;
        s.id = pid(1);
        s.friends = {pid(2)};
        bootstrap(s, p, 0.0, rng);
        EXPECT_GE(s.refresh_deadline, 0.8 * p.mean_interval);
        EXPECT_LE(s.refresh_deadline, 1.2 * p.mean_interval);
        sum += s.refresh_deadline;
    }
    EXPECT_NEAR(sum / n / p.mean_interval, 1.0, 0.01);
}

TEST(Bootstrap, StaggeredFirstPollWithinOneInterval)
{
    ProtocolParams p;
    Rng rng(42);
    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
        PeerState s;
        s.id = pid(1);
        s.friends = {pid(2)};
        bootstrap(s, p, 0.0, rng);
        EXPECT_LT(s.refresh_deadline, 1.2 * p.mean_interval);
        sum += s.refresh_deadline;
    }
    EXPECT_NEAR(sum / 10000 / p.mean_interval, 0.5, 0.01);
}

TEST(Bootstrap, NoFriendsIsConfigError)
{
    PeerState s;
    Rng rng(1);
    EXPECT_THROW(bootstrap(s, ProtocolParams{}, 0.0, rng), ConfigError);
}

TEST(ChooseInvitees, WholeListWhenSmall)
{
    const auto s = with_list(0, range_ids(1, 21));
    Rng rng(1);
    auto inv = choose_invitees(s.reference_list, 20, {}, rng);
    std::sort(inv.begin(), inv.end());
    EXPECT_EQ(inv, range_ids(1, 21));
}

TEST(ChooseInvitees, MalignShareMatchesList)
{
    // 60 entries, 18 of them (30%) malign: ids >= 1000
    std::vector<PeerId> members = range_ids(1, 43);
    for (std::uint32_t v = 1000; v < 1018; ++v) members.push_back(pid(v));
    const auto s = with_list(0, members);
    Rng rng(5);
    std::size_t malign = 0, total = 0;
    for (int t = 0; t < 10000; ++t) {
        for (PeerId p : choose_invitees(s.reference_list, 20, {}, rng)) {
            ++total;
            if (p.value >= 1000) ++malign;
        }
    }
    // 200000 draws: sampling error is well under 0.005
    EXPECT_NEAR(static_cast<double>(malign) / static_cast<double>(total), 0.30, 0.005);
}

TEST(ChooseInvitees, HonoursExclusionAndNoRepeats)
{
    const auto s = with_list(0, range_ids(1, 61));
    Rng rng(9);
    std::unordered_set<PeerId> ex{pid(1), pid(2), pid(3)};
    const auto inv = choose_invitees(s.reference_list, 30, ex, rng);
    EXPECT_EQ(inv.size(), 30u);
    std::set<std::uint32_t> seen;
    for (PeerId p : inv) {
        EXPECT_FALSE(ex.contains(p));
        EXPECT_TRUE(seen.insert(p.value).second);
    }
}

TEST(Tabulate, Examples)
{
    ProtocolParams p;
    EXPECT_EQ(tabulate(10, 10, p), Tally::LandslideWin);
    EXPECT_EQ(tabulate(10, 2, p), Tally::LandslideLoss);
    EXPECT_EQ(tabulate(10, 5, p), Tally::Inconclusive);
    EXPECT_EQ(tabulate(9, 9, p), Tally::NoQuorum);
    EXPECT_THROW(tabulate(3, 4, p), std::invalid_argument);
}

TEST(Tabulate, MatchesThreeBandOracle)
{
    ProtocolParams p;
    for (std::size_t v = 0; v <= 40; ++v)
        for (std::size_t a = 0; a <= v; ++a) EXPECT_EQ(tabulate(v, a, p), three_band(v, a, 10, 3)) << v << "/" << a;
}

TEST(Tabulate, TrichotomyAboveQuorum)
{
    ProtocolParams p;
    for (std::size_t v = p.quorum; v <= 2 * p.inner_size; ++v) {
        for (std::size_t a = 0; a <= v; ++a) {
            const Tally t = tabulate(v, a, p);
            const int hits = (t == Tally::LandslideWin) + (t == Tally::LandslideLoss) + (t == Tally::Inconclusive);
            EXPECT_EQ(hits, 1);
            EXPECT_EQ(t == Tally::LandslideWin, v - a <= p.max_minority);
            EXPECT_EQ(t == Tally::LandslideLoss, a <= p.max_minority);
        }
    }
}

TEST(AcceptsInvitation, Rules)
{
    PeerState s;
    s.refresh_deadline = 100.0;
    EXPECT_TRUE(accepts_invitation(s, false, 50.0));
    s.busy = Commitment::Voting;
    EXPECT_FALSE(accepts_invitation(s, false, 50.0));
    s.busy = Commitment::Polling;
    EXPECT_FALSE(accepts_invitation(s, false, 50.0));
    s.busy = Commitment::Idle;
    EXPECT_FALSE(accepts_invitation(s, true, 50.0));
    EXPECT_FALSE(accepts_invitation(s, false, 100.0));
}

TEST(OuterCircle, EmptyWhenListAtTarget)
{
    const auto s = with_list(0, range_ids(1, 61));
    std::vector<std::vector<PeerId>> noms{range_ids(100, 110)};
    Rng rng(1);
    EXPECT_TRUE(form_outer_circle(noms, s.reference_list, {}, ProtocolParams{}, rng).empty());
}

TEST(OuterCircle, EqualSharePerNominator)
{
    const auto s = with_list(0, range_ids(1, 31));  // 30 short of 3N
    std::vector<std::vector<PeerId>> noms;
    for (std::uint32_t j = 0; j < 10; ++j) noms.push_back(range_ids(100 + 10 * j, 110 + 10 * j));
    Rng rng(2);
    const auto outer = form_outer_circle(noms, s.reference_list, {}, ProtocolParams{}, rng);
    ASSERT_EQ(outer.size(), 30u);
    std::vector<int> per(10, 0);
    for (PeerId p : outer) ++per[(p.value - 100) / 10];
    for (int c : per) EXPECT_EQ(c, 3);
}

TEST(OuterCircle, ShortListNotBackfilled)
{
    const auto s = with_list(0, range_ids(1, 31));
    std::vector<std::vector<PeerId>> noms;
    for (std::uint32_t j = 0; j < 10; ++j) noms.push_back(range_ids(100 + 10 * j, 110 + 10 * j));
    // nominator 0 offers two fresh peers and eight already known
    noms[0] = range_ids(1, 9);
    noms[0].push_back(pid(500));
    noms[0].push_back(pid(501));
    Rng rng(3);
    const auto outer = form_outer_circle(noms, s.reference_list, {}, ProtocolParams{}, rng);
    EXPECT_EQ(outer.size(), 29u);
    EXPECT_EQ(std::count_if(outer.begin(), outer.end(), [](PeerId p) { return p.value >= 500; }), 2);
    for (PeerId p : outer) EXPECT_FALSE(s.reference_list.contains(p));
}

TEST(OuterCircle, RemainderSpreadEvenly)
{
    const auto s = with_list(0, range_ids(1, 53));  // 8 short
    std::vector<std::vector<PeerId>> noms;
    for (std::uint32_t j = 0; j < 5; ++j) noms.push_back(range_ids(100 + 10 * j, 110 + 10 * j));
    Rng rng(4);
    const auto outer = form_outer_circle(noms, s.reference_list, {}, ProtocolParams{}, rng);
    ASSERT_EQ(outer.size(), 8u);
    std::vector<int> per(5, 0);
    for (PeerId p : outer) ++per[(p.value - 100) / 10];
    for (int c : per) EXPECT_TRUE(c == 1 || c == 2);
}

TEST(UpdateReferenceList, BareQuorumOfTen)
{
    auto s = with_list(0, range_ids(1, 41));
    s.poll_counter = 1;
    std::vector<InnerVote> inner;
    for (std::uint32_t v = 1; v <= 10; ++v)
        inner.push_back({pid(v), v <= 3 ? effort::Verdict::Disagreeing : effort::Verdict::Agreeing});
    ProtocolParams p;
    p.churn = 0;
    Rng rng(1);
    const auto rep = update_reference_list(s, inner, {}, p, rng);
    EXPECT_EQ(rep.removed_disagreeing, 3u);
    EXPECT_EQ(rep.removed_agreeing, 7u);
    EXPECT_EQ(rep.removed(), 10u);
    for (std::uint32_t v = 1; v <= 10; ++v) EXPECT_FALSE(s.reference_list.contains(pid(v)));
}

TEST(UpdateReferenceList, FourteenVotesTwoDisagreeing)
{
    auto s = with_list(0, range_ids(1, 41));
    s.poll_counter = 2;
    std::vector<InnerVote> inner;
    for (std::uint32_t v = 1; v <= 14; ++v)
        inner.push_back({pid(v), v <= 2 ? effort::Verdict::Disagreeing : effort::Verdict::Agreeing});
    ProtocolParams p;
    p.churn = 0;
    Rng rng(7);
    const auto rep = update_reference_list(s, inner, {}, p, rng);
    EXPECT_EQ(rep.removed_disagreeing, 2u);
    EXPECT_EQ(rep.removed_agreeing, 8u);
    EXPECT_EQ(rep.refreshed, 4u);
    std::size_t survivors = 0;
    for (std::uint32_t v = 3; v <= 14; ++v) {
        if (const auto* e = s.reference_list.find(pid(v))) {
            ++survivors;
            EXPECT_EQ(e->time_inserted, 2u);
        }
    }
    EXPECT_EQ(survivors, 4u);
}

TEST(UpdateReferenceList, StaleEntryDropped)
{
    auto s = with_list(0, range_ids(1, 21), 10);
    s.reference_list.insert(pid(99), 5);
    s.poll_counter = 10;
    std::vector<InnerVote> inner;
    for (std::uint32_t v = 1; v <= 10; ++v) inner.push_back({pid(v), effort::Verdict::Agreeing});
    ProtocolParams p;
    p.churn = 0;
    Rng rng(1);
    const auto rep = update_reference_list(s, inner, {}, p, rng);
    EXPECT_FALSE(s.reference_list.contains(pid(99)));
    EXPECT_EQ(rep.aged_out, 1u);
}

TEST(UpdateReferenceList, OuterAndChurnInserted)
{
    auto s = with_list(0, range_ids(1, 41), 3);
    s.poll_counter = 3;
    s.friends = range_ids(200, 230);
    std::vector<InnerVote> inner;
    for (std::uint32_t v = 1; v <= 10; ++v) inner.push_back({pid(v), effort::Verdict::Agreeing});
    const std::vector<PeerId> outer{pid(300), pid(301)};
    ProtocolParams p;
    Rng rng(1);
    const auto rep = update_reference_list(s, inner, outer, p, rng);
    EXPECT_EQ(rep.inserted_outer, 2u);
    // 30 left + 2 outer = 32, churn 10% = 3
    EXPECT_EQ(rep.churned, 3u);
    EXPECT_EQ(s.reference_list.size(), 35u);
    EXPECT_TRUE(no_duplicates_or_owner(s.reference_list));
}

TEST(UpdateReferenceList, RandomizedRemovalCountIsQ)
{
    Rng rng(123);
    ProtocolParams p;
    for (int trial = 0; trial < 2000; ++trial) {
        auto s = with_list(0, range_ids(1, 61), 0);
        s.poll_counter = 1;
        s.friends = range_ids(1, 30);
        std::uniform_int_distribution<std::size_t> vd(p.quorum, p.inner_size);
        const std::size_t v = vd(rng);
        std::uniform_int_distribution<std::size_t> dd(0, p.max_minority);
        const std::size_t d = dd(rng);
        std::vector<PeerId> voters = choose_invitees(s.reference_list, v, {}, rng);
        std::vector<InnerVote> inner;
        for (std::size_t k = 0; k < voters.size(); ++k)
            inner.push_back({voters[k], k < d ? effort::Verdict::Disagreeing : effort::Verdict::Agreeing});
        std::unordered_set<PeerId> voted(voters.begin(), voters.end());
        const auto rep = update_reference_list(s, inner, {}, p, rng);
        EXPECT_EQ(rep.removed(), p.quorum);
        std::size_t gone = 0;
        for (PeerId q : voters) gone += !s.reference_list.contains(q);
        // churn may bring a removed friend straight back
        EXPECT_GE(gone + rep.churned, p.quorum);
        EXPECT_TRUE(no_duplicates_or_owner(s.reference_list));
        for (const auto& e : s.reference_list.entries()) EXPECT_LT(s.poll_counter - e.time_inserted, p.max_entry_age);
    }
}

TEST(UpdateReferenceList, NoQuorumKeepsAgreeing)
{
    auto s = with_list(0, range_ids(1, 6), 0);
    s.poll_counter = 4;
    const auto rep = update_reference_list_no_quorum(s, std::vector<PeerId>{pid(1), pid(50)});
    EXPECT_EQ(rep.refreshed, 1u);
    EXPECT_EQ(rep.inserted_outer, 1u);
    EXPECT_EQ(s.reference_list.find(pid(1))->time_inserted, 4u);
    EXPECT_TRUE(s.reference_list.contains(pid(50)));
}

TEST(SupplyRepair, OnlyAgreeingVotersInHistory)
{
    PeerState s;
    s.vote_history[pid(3)] = HistoryEntry{PollId{7}, 1};
    EXPECT_TRUE(should_supply_repair(s, pid(3)));
    EXPECT_FALSE(should_supply_repair(s, pid(4)));
}

TEST(InterPollAlarm, Threshold)
{
    ProtocolParams p;
    PeerState s;
    s.id = pid(1);
    s.last_quorate_poll_time = 0;
    EXPECT_FALSE(check_interpoll_alarm(s, 2.9 * p.mean_interval, p).has_value());
    const auto a = check_interpoll_alarm(s, 3.1 * p.mean_interval, p);
    ASSERT_TRUE(a.has_value());
    EXPECT_EQ(a->kind, AlarmKind::InterPollInterval);
    s.last_quorate_poll_time = 3.1 * p.mean_interval;
    EXPECT_FALSE(check_interpoll_alarm(s, 3.1 * p.mean_interval, p).has_value());
}

TEST(ProtocolParams, Validation)
{
    ProtocolParams p;
    EXPECT_NO_THROW(p.validate());
    p.quorum = 30;
    EXPECT_THROW(p.validate(), ConfigError);
    p = ProtocolParams{};
    p.max_minority = 5;
    EXPECT_THROW(p.validate(), ConfigError);
    p = ProtocolParams{};
    p.churn = 1.5;
    EXPECT_THROW(p.validate(), ConfigError);
}
