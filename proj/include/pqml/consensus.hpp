#pragma once

#include <map>
#include <optional>

#include "pqml/commitment.hpp"
#include "pqml/ledger.hpp"
#include "pqml/rewards.hpp"

namespace pqml {

enum class RoundPhase : uint8_t { AwaitResponse, Commit, Reveal, Finalized, Aborted };

std::string to_string(RoundPhase phase);

struct CommitEntry {
    SealedScore sealed;
    int64_t time_us = 0;
    bool excluded = false;  // arrived after the included set was fixed
};

struct RevealEntry {
    RevealRecord reveal;
    int64_t time_us = 0;
    bool valid = false;
};

struct ConsensusRound {
    uint64_t round_id = 0;
    uint64_t query_id = 0;
    NodeId inference_node;
    std::vector<NodeId> assigned_assessors;  // m nodes
    uint32_t k = 1;
    RoundPhase phase = RoundPhase::AwaitResponse;
    std::vector<CommitEntry> commits;    // arrival order
    std::vector<NodeId> included_set;    // first k by (commit time, NodeId)
    std::vector<RevealEntry> reveals;
    std::vector<NodeId> misbehaving;
    std::optional<int64_t> consensus_micros;
    int64_t deadline_commit_us = 0;
    int64_t deadline_reveal_us = 0;
    std::string abort_reason;

    bool is_assigned(const NodeId& node) const;
    bool is_included(const NodeId& node) const;
    const CommitEntry* commit_of(const NodeId& node) const;
};

class ProtocolViolation : public std::runtime_error {
public:
    ProtocolViolation(const NodeId& node, const std::string& what)
        : std::runtime_error(what), node(node) {}
    NodeId node;
};

namespace consensus {

struct CommitOutcome {
    bool excluded = false;
    bool quorum_reached = false;  // the k-th commit just fixed the included set
};

// Records a sealed score. Unknown senders and duplicate commits are
// protocol violations. Commits after the included set is fixed (or after
// the deadline) are kept with an excluded mark.
CommitOutcome on_commit(ConsensusRound& round, const SealedScore& sealed,
                        int64_t now_us);

struct RevealOutcome {
    bool valid = false;
    bool finalized = false;
    bool aborted = false;
    bool ignored = false;  // from a non-included assessor; recorded only
};

// Verifies the reveal against the stored commitment. A failed verification
// flags the sender and aborts the round (there is no replacement pool). The
// k-th valid reveal computes the consensus score and finalizes.
RevealOutcome on_reveal(ConsensusRound& round, const RevealRecord& reveal,
                        int64_t now_us);

// Aborts the round if its current phase deadline has passed without the
// required k commits or reveals. Returns true if the round aborted.
bool on_timeout(ConsensusRound& round, int64_t now_us);

struct RewardPosting {
    NodeId node;
    int64_t amount_micros = 0;
};

struct RewardPostings {
    int64_t inference_payout_micros = 0;
    std::vector<RewardPosting> assessor_payouts;  // included-set order
    int64_t returned_remainder_micros = 0;        // bounty * (1 - chi), to the user
    int64_t assessor_budget_micros = 0;           // rho * bounty
    double chi = 0.0;
    ShareVector shares;
};

// Splits the bounty per the finalized round: the inference node earns
// bounty*chi, the assessment budget rho*bounty is divided by the share
// vector among included assessors, and the unpaid remainder returns to the
// user. All amounts are exact micro-units; rounding residue is assigned by
// cumulative-target rounding so the totals conserve exactly.
RewardPostings finalize_rewards(const ConsensusRound& round,
                                const RewardParams& params, double rho,
                                int64_t bounty_micros, const ScoreDomain& domain);

Json node_to_json(const NodeId& node);
NodeId node_from_json(const Json& j);

struct AuditDivergence {
    uint64_t round_id = 0;
    std::string field;
    std::string detail;
};

struct AuditReport {
    uint64_t rounds_checked = 0;
    std::vector<AuditDivergence> divergences;

    Json to_json() const;
};

struct AuditParams {
    double beta = 0.0;
    double rho = 0.1;
    double alpha = 1.0;
    ScoreDomain domain;
};

// Replays every round's state machine from ledger records alone and
// compares recomputed consensus scores and reward postings against the
// recorded RoundFinalized / RewardsDistributed records.
AuditReport audit_replay(const std::string& ledger_path, const AuditParams& params);

}  // namespace consensus
}  // namespace pqml
