#include "lockss/effort.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace lockss::effort {

namespace {

// Stand-in for the public incompressible table of the memory-bound function.
constexpr std::array<std::uint8_t, 32> kMbfTable = {
    0x4c, 0x4f, 0x43, 0x4b, 0x53, 0x2d, 0x6d, 0x62, 0x66, 0x2d, 0x74, 0x61, 0x62, 0x6c, 0x65, 0x00,
    0x9e, 0x37, 0x79, 0xb9, 0x7f, 0x4a, 0x7c, 0x15, 0xf3, 0x9c, 0xc0, 0x60, 0x5c, 0xed, 0xc8, 0x34};

double pow2(std::uint32_t e) { return std::ldexp(1.0, static_cast<int>(e)); }

Digest content_round_hash(const Digest& proof, const Digest& output, const AuContent& au, BlockSpan span)
{
    Hasher h;
    h.update("H").update(proof).update(output);
    for (std::size_t k = span.begin; k < span.end; ++k) h.update(au.blocks[k]);
    return h.finish();
}

}  // namespace

void EffortParams::validate() const
{
    if (blocks == 0) throw ConfigError("effort: AU must have at least one block");
    if (!(block_cost > 0.0)) throw ConfigError("effort: block cost must be positive");
    if (mbf_asymmetry < 4.0) throw ConfigError("effort: mbf asymmetry must be >= 4");
    if (!(seconds_per_S > 0.0)) throw ConfigError("effort: seconds per AU hash must be positive");
    const double S = au_cost();
    const double lp = poll_walk_length();
    if (poll_asymmetry * lp < lp + (mbf_asymmetry + 1.0) * S)
        throw ConfigError("effort: poll effort must cover verification plus vote construction");
}

AuContent make_content(std::uint64_t version_id, std::size_t blocks)
{
    AuContent au;
    au.blocks.reserve(blocks);
    for (std::size_t k = 0; k < blocks; ++k) au.blocks.push_back(Hasher{}.update("blk").update_u64(version_id).update_u64(k).finish());
    return au;
}

const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::Invalid: return "invalid";
    case Verdict::Agreeing: return "agreeing";
    case Verdict::Disagreeing: return "disagreeing";
    }
    return "?";
}

std::uint32_t num_rounds(std::size_t blocks)
{
    if (blocks == 0) throw std::invalid_argument("num_rounds: empty AU");
    // ceil(log2(B + 1)) == bit width of B.
    return static_cast<std::uint32_t>(std::bit_width(blocks));
}

BlockSpan round_span(std::uint32_t round, std::size_t blocks)
{
    if (round == 0) throw std::invalid_argument("round_span: rounds are 1-based");
    const std::size_t begin = (std::size_t{1} << (round - 1)) - 1;
    const std::size_t end = std::min((std::size_t{1} << round) - 1, blocks);
    if (begin >= end) throw std::invalid_argument("round_span: round beyond the last block");
    return {begin, end};
}

Digest round_nonce(std::uint32_t round, const Digest& challenge, PollId poll, PeerId voter, const VoteRound* prev)
{
    if (round == 0) throw std::invalid_argument("round_nonce: rounds are 1-based");
    if ((round == 1) != (prev == nullptr))
        throw std::invalid_argument("round_nonce: previous round required exactly when round > 1");
    Hasher h;
    h.update("n");
    if (prev) h.update(prev->proof).update(prev->output).update(prev->content_hash);
    h.update(challenge).update_u64(poll.value).update_u64(voter.value);
    return h.finish();
}

MbfProof mbf_prove(const Digest& nonce, double walk, double asymmetry)
{
    MbfProof p;
    p.proof = Hasher{kMbfTable}.update("s").update(nonce).update_f64(walk).update_f64(asymmetry).finish();
    p.output = Hasher{}.update("A").update(nonce).update(p.proof).finish();
    return p;
}

std::optional<Digest> mbf_check(const Digest& nonce, double walk, double asymmetry, const Digest& proof)
{
    auto expected = mbf_prove(nonce, walk, asymmetry);
    if (expected.proof != proof) return std::nullopt;
    return expected.output;
}

VoteConstruction construct_vote(const Digest& challenge, PollId poll, PeerId voter, const AuContent& au,
                                const EffortParams& params)
{
    const std::size_t B = au.blocks.size();
    const std::uint32_t r = num_rounds(B);
    VoteConstruction out;
    out.vote.poll = poll;
    out.vote.voter = voter;
    out.vote.rounds.reserve(r);
    for (std::uint32_t i = 1; i <= r; ++i) {
        const BlockSpan span = round_span(i, B);
        const double hash_cost = static_cast<double>(span.size()) * params.block_cost;
        const double walk = hash_cost;
        const VoteRound* prev = i > 1 ? &out.vote.rounds.back() : nullptr;
        const Digest nonce = round_nonce(i, challenge, poll, voter, prev);
        const MbfProof mbf = mbf_prove(nonce, walk, params.mbf_asymmetry);
        VoteRound round{i, mbf.proof, mbf.output, content_round_hash(mbf.proof, mbf.output, au, span)};
        out.vote.rounds.push_back(round);
        out.cost += params.mbf_asymmetry * walk + hash_cost;
    }
    return out;
}

VoteVerification verify_vote(const Vote& vote, const AuContent& local_au, const Digest& challenge, PollId poll,
                             const EffortParams& params)
{
    const std::size_t B = local_au.blocks.size();
    const std::uint32_t r = num_rounds(B);
    VoteVerification out;
    bool disagreeing = false;
    VoteRound prev_checked{};
    for (std::uint32_t i = 1; i <= r; ++i) {
        if (i > vote.rounds.size() || vote.rounds[i - 1].index != i) {
            out.verdict = Verdict::Invalid;
            out.failed_round = i;
            return out;
        }
        const VoteRound& round = vote.rounds[i - 1];
        const BlockSpan span = round_span(i, B);
        const double hash_cost = static_cast<double>(span.size()) * params.block_cost;
        const double walk = hash_cost;
        // The chain uses the voter's proof and hash with the verifier's own A_{i-1}.
        const Digest nonce = round_nonce(i, challenge, poll, vote.voter, i > 1 ? &prev_checked : nullptr);
        out.cost += walk;
        auto output = mbf_check(nonce, walk, params.mbf_asymmetry, round.proof);
        if (!output || *output != round.output) {
            out.verdict = Verdict::Invalid;
            out.failed_round = i;
            return out;
        }
        if (!disagreeing) {
            out.cost += hash_cost;
            if (content_round_hash(round.proof, *output, local_au, span) != round.content_hash) {
                disagreeing = true;
                out.disagreeing_round = i;
            }
        }
        prev_checked = VoteRound{i, round.proof, *output, round.content_hash};
    }
    if (vote.rounds.size() != r) {
        out.verdict = Verdict::Invalid;
        out.failed_round = r + 1;
        return out;
    }
    out.verdict = disagreeing ? Verdict::Disagreeing : Verdict::Agreeing;
    return out;
}

Vote make_bogus_vote(PollId poll, PeerId voter, std::uint32_t rounds, Rng& rng)
{
    Vote v;
    v.poll = poll;
    v.voter = voter;
    v.declared_bogus = true;
    for (std::uint32_t i = 1; i <= rounds; ++i)
        v.rounds.push_back(VoteRound{i, random_digest(rng), random_digest(rng), random_digest(rng)});
    return v;
}

CostTable cost_table(const EffortParams& params)
{
    const double S = params.au_cost();
    const auto poll = poll_effort_params(S);
    CostTable t;
    t.vote_construct = (params.mbf_asymmetry + 1.0) * S;
    t.vote_verify_agree = 2.0 * S;
    t.vote_verify_disagree = S;
    t.poll_effort_construct = params.poll_walk > 0.0 ? params.poll_asymmetry * params.poll_walk : poll.construct;
    t.poll_effort_verify = params.poll_walk_length();
    t.au_hash = S;
    return t;
}

PollEffortParams poll_effort_params(double au_cost)
{
    if (!(au_cost > 0.0)) throw std::invalid_argument("poll_effort_params: S must be positive");
    PollEffortParams p;
    p.asymmetry = 4.0;
    p.walk = 5.0 * au_cost / 3.0;
    p.construct = 20.0 * au_cost / 3.0;
    p.verify = p.walk;
    return p;
}

Digest poll_effort_prove(PollId poll, const Digest& challenge, const EffortParams& params)
{
    const Digest nonce = Hasher{}.update("p").update(challenge).update_u64(poll.value).finish();
    return mbf_prove(nonce, params.poll_walk_length(), params.poll_asymmetry).proof;
}

bool poll_effort_verify(PollId poll, const Digest& challenge, const Digest& proof, const EffortParams& params)
{
    const Digest nonce = Hasher{}.update("p").update(challenge).update_u64(poll.value).finish();
    return mbf_check(nonce, params.poll_walk_length(), params.poll_asymmetry, proof).has_value();
}

AsymmetryBounds min_asymmetry(std::uint32_t round)
{
    if (round == 0) throw std::invalid_argument("min_asymmetry: rounds are 1-based");
    AsymmetryBounds b;
    const double p = pow2(round - 1);
    if (round > 1) b.invalid_mbf = 1.0 / (p - 1.0);
    b.invalid_hash = (5.0 * p - 1.0) / (2.0 * p - 1.0);
    b.minimum = std::max({b.valid_agreeing, b.invalid_mbf.value_or(0.0), b.invalid_hash});
    return b;
}

AttackCosts invalid_mbf_costs(std::uint32_t round, double asymmetry, double block_cost)
{
    if (round == 0) throw std::invalid_argument("invalid_mbf_costs: rounds are 1-based");
    const double before = pow2(round - 1) - 1.0;  // sum_{k<i} 2^{k-1}
    AttackCosts c;
    c.constructor = (asymmetry + 1.0) * before * block_cost;
    c.verifier = pow2(round - 1) * block_cost + 2.0 * before * block_cost;
    return c;
}

AttackCosts invalid_hash_costs(std::uint32_t round, double asymmetry, double block_cost)
{
    if (round == 0) throw std::invalid_argument("invalid_hash_costs: rounds are 1-based");
    const double before = pow2(round - 1) - 1.0;
    AttackCosts c;
    c.constructor = asymmetry * pow2(round - 1) * block_cost + (asymmetry + 1.0) * before * block_cost;
    c.verifier = pow2(round) * block_cost + 2.0 * (pow2(round) - 1.0) * block_cost;
    return c;
}

}  // namespace lockss::effort
