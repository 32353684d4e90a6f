#pragma once

// Round-structured vote construction and verification over a simulated
// memory-bound function, plus the cost algebra used to charge compute time.
//
// All costs are in abstract cost units (one unit = hashing one cache line).
// An AU of B blocks of b units each costs S = b*B units to hash.

#include "lockss/core.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace lockss::effort {

struct EffortParams {
    std::size_t blocks = 3;        // B
    double block_cost = 1.0;       // b
    double mbf_asymmetry = 4.0;    // E_mbf
    double poll_asymmetry = 4.0;   // E_p
    double poll_walk = 0.0;        // l_p; 0 selects the canonical (5/3)S
    double seconds_per_S = 120.0;  // wall-clock charge for hashing the whole AU

    double au_cost() const { return block_cost * static_cast<double>(blocks); }
    double poll_walk_length() const { return poll_walk > 0.0 ? poll_walk : 5.0 * au_cost() / 3.0; }
    double seconds(double cost_units) const { return cost_units * seconds_per_S / au_cost(); }

    // Throws ConfigError unless B >= 1, E_mbf >= 4 and C_p >= V_p + C_v.
    void validate() const;
};

// Opaque AU content: B block digests.
struct AuContent {
    std::vector<Digest> blocks;
};

AuContent make_content(std::uint64_t version_id, std::size_t blocks);

struct VoteRound {
    std::uint32_t index = 0;  // 1-based
    Digest proof{};           // s_i
    Digest output{};          // A_i
    Digest content_hash{};    // H_i
};

struct Vote {
    PollId poll;
    PeerId voter;
    std::vector<VoteRound> rounds;
    bool declared_bogus = false;  // bookkeeping only; never consulted by verification
};

enum class Verdict { Invalid, Agreeing, Disagreeing };

const char* to_string(Verdict v);

struct BlockSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

// r = ceil(log2(B + 1)). Throws std::invalid_argument for B = 0.
std::uint32_t num_rounds(std::size_t blocks);

// Blocks [2^{i-1} - 1, min(2^i - 1, B)).
BlockSpan round_span(std::uint32_t round, std::size_t blocks);

// n_1 = h(challenge | poll | voter); n_i = h(s_{i-1} | A_{i-1} | H_{i-1} | challenge | poll | voter).
// `prev` must be present exactly when round > 1.
Digest round_nonce(std::uint32_t round, const Digest& challenge, PollId poll, PeerId voter, const VoteRound* prev);

struct MbfProof {
    Digest proof;
    Digest output;
};

MbfProof mbf_prove(const Digest& nonce, double walk, double asymmetry);

// Output value A if `proof` is the valid proof for (nonce, walk, asymmetry).
std::optional<Digest> mbf_check(const Digest& nonce, double walk, double asymmetry, const Digest& proof);

struct VoteConstruction {
    Vote vote;
    double cost = 0.0;
};

VoteConstruction construct_vote(const Digest& challenge, PollId poll, PeerId voter, const AuContent& au,
                                const EffortParams& params);

struct VoteVerification {
    Verdict verdict = Verdict::Invalid;
    double cost = 0.0;
    std::uint32_t failed_round = 0;        // round at which the vote became invalid, 0 if valid
    std::uint32_t disagreeing_round = 0;   // first mismatching content hash, 0 if none
};

VoteVerification verify_vote(const Vote& vote, const AuContent& local_au, const Digest& challenge, PollId poll,
                             const EffortParams& params);

// What a decliner sends: rounds of random bytes.
Vote make_bogus_vote(PollId poll, PeerId voter, std::uint32_t rounds, Rng& rng);

struct CostTable {
    double vote_construct = 0;        // C_v
    double vote_verify_agree = 0;     // V_v
    double vote_verify_disagree = 0;  // V_vd (nominal)
    double poll_effort_construct = 0; // C_p
    double poll_effort_verify = 0;    // V_p
    double au_hash = 0;               // S
};

CostTable cost_table(const EffortParams& params);

struct PollEffortParams {
    double asymmetry = 0;  // E_p
    double walk = 0;       // l_p
    double construct = 0;  // C_p
    double verify = 0;     // V_p
};

// E_p = 4, l_p = (5/3)S. Throws std::invalid_argument for S <= 0.
PollEffortParams poll_effort_params(double au_cost);

Digest poll_effort_prove(PollId poll, const Digest& challenge, const EffortParams& params);
bool poll_effort_verify(PollId poll, const Digest& challenge, const Digest& proof, const EffortParams& params);

struct AsymmetryBounds {
    double valid_agreeing = 1.0;
    std::optional<double> invalid_mbf;  // absent for round 1, where the bound is unsatisfiable
    double invalid_hash = 0.0;
    double minimum = 0.0;               // max over the present bounds
};

// Throws std::invalid_argument for round 0.
AsymmetryBounds min_asymmetry(std::uint32_t round);

// Closed-form costs of a vote that is garbage from round i's MBF proof (or
// content hash) onwards, with l_k = 2^{k-1} b and constant E.
struct AttackCosts {
    double constructor = 0;
    double verifier = 0;
};

AttackCosts invalid_mbf_costs(std::uint32_t round, double asymmetry, double block_cost);
AttackCosts invalid_hash_costs(std::uint32_t round, double asymmetry, double block_cost);

}  // namespace lockss::effort
