#include "lockss/effort.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lockss;
using namespace lockss::effort;

namespace {

Digest digest_of(std::uint64_t v) { return Hasher{}.update_u64(v).finish(); }

// Canonical scenario: three blocks, S maps to 120 s.
EffortParams canonical()
{
    EffortParams p;
    p.blocks = 3;
    p.block_cost = 1.0;
    p.mbf_asymmetry = 4.0;
    p.seconds_per_S = 120.0;
    return p;
}

// Sum of round span sizes up to `round`, by brute force over blocks.
double span_units(std::uint32_t upto, std::size_t blocks, double b)
{
    double total = 0;
    for (std::size_t k = 0; k < blocks; ++k) {
        // block k belongs to round floor(log2(k + 1)) + 1
        std::uint32_t r = 1;
        while ((std::size_t{1} << r) - 1 <= k) ++r;
        if (r <= upto) total += b;
    }
    return total;
}

}  // namespace

TEST(NumRounds, Examples)
{
    EXPECT_EQ(num_rounds(1), 1u);
    EXPECT_EQ(num_rounds(3), 2u);
    EXPECT_EQ(num_rounds(1023), 10u);
    EXPECT_THROW(num_rounds(0), std::invalid_argument);
}

TEST(NumRounds, BracketsBlockCount)
{
    for (std::size_t B = 1; B <= 4096; ++B) {
        const std::uint32_t r = num_rounds(B);
        EXPECT_LT((std::size_t{1} << (r - 1)) - 1, B) << B;
        EXPECT_LE(B, (std::size_t{1} << r) - 1) << B;
        EXPECT_EQ(r, static_cast<std::uint32_t>(std::ceil(std::log2(static_cast<double>(B) + 1.0)))) << B;
    }
}

TEST(RoundSpan, CoversEveryBlockOnce)
{
    for (std::size_t B : {1u, 2u, 3u, 4u, 7u, 8u, 100u, 1023u, 1024u}) {
        std::size_t next = 0;
        for (std::uint32_t i = 1; i <= num_rounds(B); ++i) {
            const auto s = round_span(i, B);
            EXPECT_EQ(s.begin, next);
            EXPECT_GT(s.end, s.begin);
            next = s.end;
        }
        EXPECT_EQ(next, B);
    }
}

TEST(RoundNonce, Deterministic)
{
    const Digest c = digest_of(7);
    EXPECT_EQ(round_nonce(1, c, PollId{3}, PeerId{4}, nullptr), round_nonce(1, c, PollId{3}, PeerId{4}, nullptr));
}

TEST(RoundNonce, ChallengeBitFlipPropagates)
{
    const auto au = make_content(1, 15);
    const auto p = canonical();
    Digest c = digest_of(9);
    const auto a = construct_vote(c, PollId{1}, PeerId{2}, au, p).vote;
    c[0] ^= 1;
    const auto b = construct_vote(c, PollId{1}, PeerId{2}, au, p).vote;
    ASSERT_EQ(a.rounds.size(), b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        EXPECT_NE(a.rounds[i].proof, b.rounds[i].proof) << i;
        EXPECT_NE(a.rounds[i].content_hash, b.rounds[i].content_hash) << i;
    }
}

TEST(RoundNonce, DependsOnPreviousContentHash)
{
    VoteRound prev{1, digest_of(1), digest_of(2), digest_of(3)};
    const Digest c = digest_of(4);
    const Digest n = round_nonce(2, c, PollId{5}, PeerId{6}, &prev);
    prev.content_hash[5] ^= 0x80;
    EXPECT_NE(n, round_nonce(2, c, PollId{5}, PeerId{6}, &prev));
}

TEST(RoundNonce, RejectsMissingOrExtraPrevious)
{
    VoteRound prev{};
    EXPECT_THROW(round_nonce(1, Digest{}, PollId{}, PeerId{}, &prev), std::invalid_argument);
    EXPECT_THROW(round_nonce(2, Digest{}, PollId{}, PeerId{}, nullptr), std::invalid_argument);
}

TEST(ConstructVote, FourBlocksCostsFiveS)
{
    EffortParams p;
    p.blocks = 4;
    const auto v = construct_vote(digest_of(1), PollId{1}, PeerId{1}, make_content(1, 4), p);
    EXPECT_DOUBLE_EQ(v.cost, 20.0);
    EXPECT_EQ(v.vote.rounds.size(), num_rounds(4));
}

TEST(ConstructVote, SixHundredSeconds)
{
    const auto p = canonical();
    const auto v = construct_vote(digest_of(1), PollId{1}, PeerId{1}, make_content(1, p.blocks), p);
    EXPECT_DOUBLE_EQ(p.seconds(v.cost), 600.0);
}

TEST(ConstructVote, VoterIdentityInNonce)
{
    const auto p = canonical();
    const auto au = make_content(1, 7);
    const auto a = construct_vote(digest_of(1), PollId{1}, PeerId{1}, au, p).vote;
    const auto b = construct_vote(digest_of(1), PollId{1}, PeerId{2}, au, p).vote;
    for (std::size_t i = 0; i < a.rounds.size(); ++i) EXPECT_NE(a.rounds[i].proof, b.rounds[i].proof);
}

TEST(VerifyVote, AgreeingCostsTwoS)
{
    for (std::size_t B : {1u, 3u, 4u, 20u, 255u}) {
        EffortParams p;
        p.blocks = B;
        const auto au = make_content(1, B);
        const auto v = construct_vote(digest_of(1), PollId{1}, PeerId{1}, au, p).vote;
        const auto r = verify_vote(v, au, digest_of(1), PollId{1}, p);
        EXPECT_EQ(r.verdict, Verdict::Agreeing);
        EXPECT_DOUBLE_EQ(r.cost, 2.0 * p.au_cost()) << B;
    }
}

TEST(VerifyVote, FirstBlockDifferenceFoundInRoundOne)
{
    EffortParams p;
    p.blocks = 7;
    auto mine = make_content(1, 7);
    auto theirs = mine;
    theirs.blocks[0] = digest_of(99);
    const auto v = construct_vote(digest_of(1), PollId{1}, PeerId{1}, theirs, p).vote;
    const auto r = verify_vote(v, mine, digest_of(1), PollId{1}, p);
    EXPECT_EQ(r.verdict, Verdict::Disagreeing);
    EXPECT_EQ(r.disagreeing_round, 1u);
}

TEST(VerifyVote, GarbageAtRoundThree)
{
    EffortParams p;
    p.blocks = 15;  // rounds of 1, 2, 4, 8 blocks
    const auto au = make_content(1, 15);
    auto v = construct_vote(digest_of(1), PollId{1}, PeerId{1}, au, p).vote;
    v.rounds[2].proof = digest_of(1234);
    const auto r = verify_vote(v, au, digest_of(1), PollId{1}, p);
    EXPECT_EQ(r.verdict, Verdict::Invalid);
    EXPECT_EQ(r.failed_round, 3u);
    // verifier: full rounds 1 and 2 (MBF + hash) then round 3's MBF check
    const double l3 = 4.0;
    const double verifier = 2.0 * (1.0 + 2.0) + l3;
    EXPECT_DOUBLE_EQ(r.cost, verifier);
    // constructor sunk cost for rounds 1 and 2
    const double sunk = (p.mbf_asymmetry + 1.0) * (1.0 + 2.0);
    EXPECT_GE(sunk, verifier);
}

TEST(VerifyVote, ChainTamperingDetectedByNextRound)
{
    EffortParams p;
    p.blocks = 31;
    const auto au = make_content(3, 31);
    const Digest c = digest_of(5);
    const auto good = construct_vote(c, PollId{8}, PeerId{9}, au, p).vote;
    const std::uint32_t r = num_rounds(31);
    for (std::uint32_t i = 2; i <= r; ++i) {
        for (int field = 0; field < 3; ++field) {
            auto v = good;
            auto& prev = v.rounds[i - 2];
            Digest& d = field == 0 ? prev.proof : field == 1 ? prev.output : prev.content_hash;
            d[17] ^= 0x04;
            const auto res = verify_vote(v, au, c, PollId{8}, p);
            EXPECT_EQ(res.verdict, Verdict::Invalid) << "round " << i << " field " << field;
            EXPECT_LE(res.failed_round, i);
            EXPECT_GE(res.failed_round, i - 1);
        }
    }
}

TEST(VerifyVote, BogusVoteDiscoveredByVerification)
{
    const auto p = canonical();
    const auto au = make_content(1, p.blocks);
    Rng rng(1);
    auto bogus = make_bogus_vote(PollId{1}, PeerId{1}, num_rounds(p.blocks), rng);
    // the flag carries no weight: clearing it changes nothing
    auto unflagged = bogus;
    unflagged.declared_bogus = false;
    const auto a = verify_vote(bogus, au, digest_of(1), PollId{1}, p);
    const auto b = verify_vote(unflagged, au, digest_of(1), PollId{1}, p);
    EXPECT_EQ(a.verdict, Verdict::Invalid);
    EXPECT_EQ(a.failed_round, 1u);
    EXPECT_EQ(a.verdict, b.verdict);
    EXPECT_DOUBLE_EQ(a.cost, b.cost);
}

TEST(VerifyVote, TruncatedVoteInvalid)
{
    const auto p = canonical();
    const auto au = make_content(1, p.blocks);
    auto v = construct_vote(digest_of(1), PollId{1}, PeerId{1}, au, p).vote;
    v.rounds.pop_back();
    EXPECT_EQ(verify_vote(v, au, digest_of(1), PollId{1}, p).verdict, Verdict::Invalid);
}

TEST(VerifyVote, PureFunctions)
{
    const auto p = canonical();
    const auto au = make_content(4, p.blocks);
    const auto a = construct_vote(digest_of(2), PollId{3}, PeerId{4}, au, p);
    const auto b = construct_vote(digest_of(2), PollId{3}, PeerId{4}, au, p);
    ASSERT_EQ(a.vote.rounds.size(), b.vote.rounds.size());
    for (std::size_t i = 0; i < a.vote.rounds.size(); ++i) {
        EXPECT_EQ(a.vote.rounds[i].proof, b.vote.rounds[i].proof);
        EXPECT_EQ(a.vote.rounds[i].content_hash, b.vote.rounds[i].content_hash);
    }
    EXPECT_EQ(a.cost, b.cost);
    const auto r1 = verify_vote(a.vote, au, digest_of(2), PollId{3}, p);
    const auto r2 = verify_vote(a.vote, au, digest_of(2), PollId{3}, p);
    EXPECT_EQ(r1.verdict, r2.verdict);
    EXPECT_EQ(r1.cost, r2.cost);
}

TEST(CostTable, CanonicalRatios)
{
    for (double S : {3.0, 12.0, 1000.0}) {
        EffortParams p;
        p.blocks = static_cast<std::size_t>(S);
        const auto t = cost_table(p);
        EXPECT_DOUBLE_EQ(t.vote_construct, 5 * S);
        EXPECT_DOUBLE_EQ(t.vote_verify_agree, 2 * S);
        EXPECT_DOUBLE_EQ(t.vote_verify_disagree, S);
        EXPECT_DOUBLE_EQ(t.poll_effort_construct, 20 * S / 3);
        EXPECT_DOUBLE_EQ(t.poll_effort_verify, 5 * S / 3);
        EXPECT_DOUBLE_EQ(t.au_hash, S);
    }
}

TEST(PollEffort, SecondsPerInvitee)
{
    const auto p = canonical();
    const auto t = cost_table(p);
    EXPECT_DOUBLE_EQ(p.seconds(t.poll_effort_construct), 800.0);
    EXPECT_DOUBLE_EQ(p.seconds(t.poll_effort_verify), 200.0);
    EXPECT_DOUBLE_EQ(p.seconds(t.poll_effort_construct + t.vote_verify_agree), 1040.0);
    EXPECT_DOUBLE_EQ(t.poll_effort_construct - (t.poll_effort_verify + t.vote_construct), 0.0);
}

TEST(PollEffort, ParamsAndProofs)
{
    const auto pe = poll_effort_params(3.0);
    EXPECT_DOUBLE_EQ(pe.asymmetry, 4.0);
    EXPECT_DOUBLE_EQ(pe.walk, 5.0);
    EXPECT_DOUBLE_EQ(pe.construct, 20.0);
    EXPECT_DOUBLE_EQ(pe.verify, 5.0);
    EXPECT_GE((pe.asymmetry - 1) * pe.walk, 5 * 3.0);
    EXPECT_THROW(poll_effort_params(0.0), std::invalid_argument);

    const auto p = canonical();
    const Digest proof = poll_effort_prove(PollId{1}, digest_of(1), p);
    EXPECT_TRUE(poll_effort_verify(PollId{1}, digest_of(1), proof, p));
    EXPECT_FALSE(poll_effort_verify(PollId{2}, digest_of(1), proof, p));
    EXPECT_FALSE(poll_effort_verify(PollId{1}, digest_of(2), proof, p));
}

TEST(EffortParams, Validation)
{
    EffortParams p;
    EXPECT_NO_THROW(p.validate());
    p.mbf_asymmetry = 3.0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = EffortParams{};
    p.blocks = 0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = EffortParams{};
    p.poll_asymmetry = 2.0;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(MinAsymmetry, Examples)
{
    const auto b1 = min_asymmetry(1);
    EXPECT_FALSE(b1.invalid_mbf.has_value());
    EXPECT_DOUBLE_EQ(b1.invalid_hash, 4.0);
    EXPECT_DOUBLE_EQ(b1.minimum, 4.0);
    const auto b2 = min_asymmetry(2);
    ASSERT_TRUE(b2.invalid_mbf.has_value());
    EXPECT_DOUBLE_EQ(*b2.invalid_mbf, 1.0);
    EXPECT_DOUBLE_EQ(b2.invalid_hash, 3.0);
    EXPECT_DOUBLE_EQ(b2.minimum, 3.0);
    EXPECT_NEAR(min_asymmetry(60).invalid_hash, 2.5, 1e-12);
    for (std::uint32_t i = 1; i <= 40; ++i) EXPECT_LE(min_asymmetry(i).minimum, 4.0);
    EXPECT_THROW(min_asymmetry(0), std::invalid_argument);
}

// An agreeing vote never costs more to verify than it cost to build.
TEST(CostDominance, AgreeingVotesAllSizes)
{
    for (double E : {1.0, 4.0, 6.0}) {
        for (std::size_t B = 1; B <= 256; ++B) {
            EffortParams p;
            p.blocks = B;
            p.mbf_asymmetry = E;
            const auto au = make_content(2, B);
            const auto c = construct_vote(digest_of(B), PollId{B}, PeerId{1}, au, p);
            const auto v = verify_vote(c.vote, au, digest_of(B), PollId{B}, p);
            ASSERT_EQ(v.verdict, Verdict::Agreeing);
            EXPECT_GE(c.cost, v.cost) << "B=" << B << " E=" << E;
        }
    }
}

// The invalid-proof and invalid-hash cost bounds measured on real tampered votes: the verifier's
// charged cost against the constructor's sunk cost.
TEST(CostDominance, CorruptedRoundsMeasured)
{
    constexpr std::size_t B = (std::size_t{1} << 16) - 1;
    EffortParams p;
    p.blocks = B;
    const auto au = make_content(5, B);
    const Digest c = digest_of(77);
    const auto good = construct_vote(c, PollId{1}, PeerId{1}, au, p).vote;
    const double E = p.mbf_asymmetry;
    for (std::uint32_t i = 1; i <= 16; ++i) {
        const double li = span_units(i, B, 1.0) - span_units(i - 1, B, 1.0);
        const double before = span_units(i - 1, B, 1.0);
        // garbage MBF proof at round i
        auto bad_mbf = good;
        bad_mbf.rounds[i - 1].proof = digest_of(1000 + i);
        const auto vm = verify_vote(bad_mbf, au, c, PollId{1}, p);
        ASSERT_EQ(vm.verdict, Verdict::Invalid);
        ASSERT_EQ(vm.failed_round, i);
        const double sunk_mbf = (E + 1) * before;
        EXPECT_DOUBLE_EQ(vm.cost, 2 * before + li);
        if (i >= 2) EXPECT_GE(sunk_mbf, vm.cost) << i;
        if (i == 1) EXPECT_LT(sunk_mbf, vm.cost);
        const auto formula_mbf = invalid_mbf_costs(i, E, 1.0);
        EXPECT_DOUBLE_EQ(formula_mbf.verifier, vm.cost);
        EXPECT_DOUBLE_EQ(formula_mbf.constructor, sunk_mbf);

        if (i == 16) continue;  // no round after the last to expose a bad hash
        // garbage content hash at round i; the next round's chain breaks
        auto bad_hash = good;
        bad_hash.rounds[i - 1].content_hash = digest_of(2000 + i);
        const auto vh = verify_vote(bad_hash, au, c, PollId{1}, p);
        ASSERT_EQ(vh.verdict, Verdict::Invalid);
        ASSERT_EQ(vh.failed_round, i + 1);
        const double l_next = span_units(i + 1, B, 1.0) - span_units(i, B, 1.0);
        EXPECT_DOUBLE_EQ(vh.cost, 2 * (before + li) + l_next);
        const double sunk_hash = E * li + (E + 1) * before;
        EXPECT_GE(sunk_hash, vh.cost) << i;
        const auto formula_hash = invalid_hash_costs(i, E, 1.0);
        EXPECT_DOUBLE_EQ(formula_hash.verifier, vh.cost);
        EXPECT_DOUBLE_EQ(formula_hash.constructor, sunk_hash);
    }
}

TEST(CostDominance, AsymmetryThreeFailsFirstRound)
{
    const auto c3 = invalid_hash_costs(1, 3.0, 1.0);
    EXPECT_LT(c3.constructor, c3.verifier);
    const auto c4 = invalid_hash_costs(1, 4.0, 1.0);
    EXPECT_GE(c4.constructor, c4.verifier);
    for (std::uint32_t i = 2; i <= 16; ++i) {
        const auto m = invalid_mbf_costs(i, 4.0, 1.0);
        EXPECT_GE(m.constructor, m.verifier) << i;
    }
    for (std::uint32_t i = 1; i <= 16; ++i) {
        const auto h = invalid_hash_costs(i, 4.0, 1.0);
        EXPECT_GE(h.constructor, h.verifier) << i;
    }
}
