#include "pqml/consensus.hpp"

#include <algorithm>
#include <unordered_map>

namespace pqml {

std::string to_string(RoundPhase phase) {
    switch (phase) {
        case RoundPhase::AwaitResponse: return "await-response";
        case RoundPhase::Commit: return "commit";
        case RoundPhase::Reveal: return "reveal";
        case RoundPhase::Finalized: return "finalized";
        case RoundPhase::Aborted: return "aborted";
    }
    return "unknown";
}

bool ConsensusRound::is_assigned(const NodeId& node) const {
    return std::find(assigned_assessors.begin(), assigned_assessors.end(), node) !=
           assigned_assessors.end();
}

bool ConsensusRound::is_included(const NodeId& node) const {
    return std::find(included_set.begin(), included_set.end(), node) !=
           included_set.end();
}

const CommitEntry* ConsensusRound::commit_of(const NodeId& node) const {
    for (const auto& c : commits) {
        if (c.sealed.assessor == node) return &c;
    }
    return nullptr;
}

namespace consensus {

Json node_to_json(const NodeId& node) {
    Json j;
    j["id"] = node.id;
    j["role"] = to_string(node.role);
    return j;
}

NodeId node_from_json(const Json& j) {
    NodeId n;
    n.id = j.at("id").get<uint64_t>();
    std::string role = j.at("role").get<std::string>();
    if (role == "management") n.role = NodeRole::Management;
    else if (role == "inference") n.role = NodeRole::Inference;
    else if (role == "assessor") n.role = NodeRole::Assessor;
    else throw std::invalid_argument("unknown node role '" + role + "'");
    return n;
}

CommitOutcome on_commit(ConsensusRound& round, const SealedScore& sealed,
                        int64_t now_us) {
    const NodeId& sender = sealed.assessor;
    if (!round.is_assigned(sender)) {
        throw ProtocolViolation(sender, "commit from unassigned node " + to_string(sender));
    }
    if (round.commit_of(sender) != nullptr) {
        round.misbehaving.push_back(sender);
        throw ProtocolViolation(sender, "duplicate commit from " + to_string(sender));
    }

    CommitOutcome out;
    bool late = round.phase != RoundPhase::Commit || now_us > round.deadline_commit_us;
    round.commits.push_back({sealed, now_us, late});
    if (late) {
        out.excluded = true;
        return out;
    }

    size_t timely = 0;
    for (const auto& c : round.commits) {
        if (!c.excluded) ++timely;
    }
    if (timely >= round.k) {
        // Fix the included set: first k by (commit time, NodeId).
        std::vector<const CommitEntry*> timely_commits;
        for (const auto& c : round.commits) {
            if (!c.excluded) timely_commits.push_back(&c);
        }
        std::sort(timely_commits.begin(), timely_commits.end(),
                  [](const CommitEntry* a, const CommitEntry* b) {
                      if (a->time_us != b->time_us) return a->time_us < b->time_us;
                      return a->sealed.assessor.id < b->sealed.assessor.id;
                  });
        round.included_set.clear();
        for (size_t i = 0; i < round.k; ++i) {
            round.included_set.push_back(timely_commits[i]->sealed.assessor);
        }
        round.phase = RoundPhase::Reveal;
        out.quorum_reached = true;
    }
    return out;
}

RevealOutcome on_reveal(ConsensusRound& round, const RevealRecord& reveal,
                        int64_t now_us) {
    RevealOutcome out;
    const NodeId& sender = reveal.assessor;
    if (round.phase != RoundPhase::Reveal || !round.is_included(sender) ||
        now_us > round.deadline_reveal_us) {
        round.reveals.push_back({reveal, now_us, false});
        out.ignored = true;
        return out;
    }
    const CommitEntry* commit = round.commit_of(sender);
    if (commit == nullptr) {
        round.reveals.push_back({reveal, now_us, false});
        out.ignored = true;
        return out;
    }
    try {
        open(commit->sealed, reveal);
    } catch (const VerificationError&) {
        round.reveals.push_back({reveal, now_us, false});
        round.misbehaving.push_back(sender);
        std::erase(round.included_set, sender);
        // No replacement pool: fewer than k honest reveals can remain.
        round.phase = RoundPhase::Aborted;
        round.abort_reason = "reveal verification failed for " + to_string(sender);
        out.aborted = true;
        return out;
    }

    round.reveals.push_back({reveal, now_us, true});
    out.valid = true;

    std::vector<QualityScore> scores;
    for (const NodeId& node : round.included_set) {
        for (const auto& r : round.reveals) {
            if (r.valid && r.reveal.assessor == node) {
                scores.push_back(r.reveal.score);
                break;
            }
        }
    }
    if (scores.size() == round.k) {
        round.consensus_micros = consensus_mean_micros(scores);
        round.phase = RoundPhase::Finalized;
        out.finalized = true;
    }
    return out;
}

bool on_timeout(ConsensusRound& round, int64_t now_us) {
    if (round.phase == RoundPhase::Commit && now_us > round.deadline_commit_us) {
        round.phase = RoundPhase::Aborted;
        round.abort_reason = "commit deadline passed with fewer than k commits";
        return true;
    }
    if (round.phase == RoundPhase::Reveal && now_us > round.deadline_reveal_us) {
        round.phase = RoundPhase::Aborted;
        round.abort_reason = "reveal deadline passed with fewer than k valid reveals";
        return true;
    }
    return false;
}

RewardPostings finalize_rewards(const ConsensusRound& round,
                                const RewardParams& params, double rho,
                                int64_t bounty_micros, const ScoreDomain& domain) {
    if (round.phase != RoundPhase::Finalized) {
        throw std::logic_error("finalize_rewards: round is not finalized");
    }
    if (rho < 0) throw std::invalid_argument("finalize_rewards: rho must be >= 0");

    std::vector<QualityScore> scores;
    for (const NodeId& node : round.included_set) {
        for (const auto& r : round.reveals) {
            if (r.valid && r.reveal.assessor == node) {
                scores.push_back(r.reveal.score);
                break;
            }
        }
    }

    RewardPostings out;
    out.chi = inference_reward(scores, params, domain);
    out.inference_payout_micros = scale_micros(bounty_micros, out.chi);
    out.returned_remainder_micros = bounty_micros - out.inference_payout_micros;
    out.assessor_budget_micros = scale_micros(bounty_micros, rho);
    out.shares = assessor_shares(scores, params.beta);

    // Cumulative-target rounding: each payout is the difference of two
    // rounded cumulative sums, so the payouts total the budget exactly.
    int64_t paid = 0;
    double cumulative = 0.0;
    for (size_t i = 0; i < round.included_set.size(); ++i) {
        cumulative += out.shares.shares[i];
        int64_t target =
            scale_micros(out.assessor_budget_micros, std::min(cumulative, 1.0));
        if (i + 1 == round.included_set.size()) {
            target = out.assessor_budget_micros;
        }
        out.assessor_payouts.push_back({round.included_set[i], target - paid});
        paid = target;
    }
    return out;
}

namespace {

QualityScore score_from_body(const Json& body) {
    return QualityScore{body.at("score_micros").get<int64_t>()};
}

}  // namespace

Json AuditReport::to_json() const {
    Json j;
    j["rounds_checked"] = rounds_checked;
    j["divergences"] = Json::array();
    for (const auto& d : divergences) {
        Json dj;
        dj["round_id"] = d.round_id;
        dj["field"] = d.field;
        dj["detail"] = d.detail;
        j["divergences"].push_back(dj);
    }
    return j;
}

AuditReport audit_replay(const std::string& ledger_path, const AuditParams& params) {
    auto chain = verify_chain(ledger_path);
    if (!chain.ok) {
        throw LedgerError("audit_replay: hash chain broken at seq " +
                          std::to_string(chain.first_bad_seq));
    }
    auto records = read_ledger(ledger_path);

    AuditReport report;
    std::unordered_map<uint64_t, ConsensusRound> rounds;
    std::unordered_map<uint64_t, int64_t> bounties;        // query_id -> micros
    std::unordered_map<uint64_t, RewardParams> round_params;

    auto diverge = [&](uint64_t round_id, const std::string& field,
                       const std::string& detail) {
        report.divergences.push_back({round_id, field, detail});
    };

    for (const auto& rec : records) {
        switch (rec.kind) {
            case RecordKind::QueryPosted: {
                bounties[rec.body.at("query_id").get<uint64_t>()] =
                    rec.body.at("bounty_micros").get<int64_t>();
                break;
            }
            case RecordKind::ResponsePosted:
                break;
            case RecordKind::AssessorsAssigned: {
                ConsensusRound round;
                round.round_id = rec.body.at("round_id").get<uint64_t>();
                round.query_id = rec.body.at("query_id").get<uint64_t>();
                round.inference_node = node_from_json(rec.body.at("inference"));
                round.k = rec.body.at("k").get<uint32_t>();
                for (const auto& a : rec.body.at("assessors")) {
                    round.assigned_assessors.push_back(node_from_json(a));
                }
                round.deadline_commit_us =
                    rec.body.at("deadline_commit_us").get<int64_t>();
                round.deadline_reveal_us =
                    rec.body.at("deadline_reveal_us").get<int64_t>();
                round.phase = RoundPhase::Commit;
                RewardParams rp;
                rp.alpha = params.alpha;
                rp.beta = params.beta;
                rp.k = round.k;
                rp.m = static_cast<uint32_t>(round.assigned_assessors.size());
                round_params[round.round_id] = rp;
                rounds[round.round_id] = std::move(round);
                break;
            }
            case RecordKind::ScoreSealed: {
                uint64_t rid = rec.body.at("round_id").get<uint64_t>();
                auto& round = rounds.at(rid);
                SealedScore sealed;
                sealed.scheme =
                    seal_scheme_from_string(rec.body.at("scheme").get<std::string>());
                sealed.round_id = rid;
                sealed.assessor = node_from_json(rec.body.at("assessor"));
                sealed.commitment = from_hex(rec.body.at("commitment").get<std::string>());
                auto outcome = on_commit(round, sealed, rec.time_us);
                if (outcome.excluded != rec.body.at("excluded").get<bool>()) {
                    diverge(rid, "commit.excluded",
                            "replayed exclusion flag disagrees for " +
                                to_string(sealed.assessor));
                }
                break;
            }
            case RecordKind::ScoreRevealed: {
                uint64_t rid = rec.body.at("round_id").get<uint64_t>();
                auto& round = rounds.at(rid);
                RevealRecord reveal;
                reveal.round_id = rid;
                reveal.assessor = node_from_json(rec.body.at("assessor"));
                reveal.score = score_from_body(rec.body);
                reveal.opening = from_hex(rec.body.at("opening").get<std::string>());
                auto outcome = on_reveal(round, reveal, rec.time_us);
                if (outcome.valid != rec.body.at("valid").get<bool>()) {
                    diverge(rid, "reveal.valid",
                            "replayed validity flag disagrees for " +
                                to_string(reveal.assessor));
                }
                break;
            }
            case RecordKind::RoundFinalized: {
                uint64_t rid = rec.body.at("round_id").get<uint64_t>();
                const auto& round = rounds.at(rid);
                ++report.rounds_checked;
                int64_t recorded = rec.body.at("consensus_micros").get<int64_t>();
                if (round.phase != RoundPhase::Finalized) {
                    diverge(rid, "phase", "replay did not finalize the round");
                } else if (round.consensus_micros.value() != recorded) {
                    diverge(rid, "consensus_micros",
                            "recorded " + std::to_string(recorded) + " replayed " +
                                std::to_string(round.consensus_micros.value()));
                }
                break;
            }
            case RecordKind::RoundAborted: {
                uint64_t rid = rec.body.at("round_id").get<uint64_t>();
                auto& round = rounds.at(rid);
                ++report.rounds_checked;
                if (round.phase != RoundPhase::Aborted) {
                    on_timeout(round, rec.time_us);
                }
                if (round.phase != RoundPhase::Aborted) {
                    diverge(rid, "phase", "replay did not abort the round");
                }
                break;
            }
            case RecordKind::RewardsDistributed: {
                uint64_t rid = rec.body.at("round_id").get<uint64_t>();
                const auto& round = rounds.at(rid);
                if (round.phase != RoundPhase::Finalized) {
                    diverge(rid, "rewards", "rewards posted for a non-finalized round");
                    break;
                }
                int64_t bounty = bounties.at(round.query_id);
                auto postings = finalize_rewards(round, round_params.at(rid),
                                                 params.rho, bounty, params.domain);
                if (postings.inference_payout_micros !=
                    rec.body.at("inference_payout_micros").get<int64_t>()) {
                    diverge(rid, "inference_payout_micros", "payout mismatch");
                }
                if (postings.returned_remainder_micros !=
                    rec.body.at("returned_remainder_micros").get<int64_t>()) {
                    diverge(rid, "returned_remainder_micros", "remainder mismatch");
                }
                const auto& recorded = rec.body.at("assessor_payouts");
                if (recorded.size() != postings.assessor_payouts.size()) {
                    diverge(rid, "assessor_payouts", "payout count mismatch");
                    break;
                }
                for (size_t i = 0; i < recorded.size(); ++i) {
                    if (recorded[i].at("amount_micros").get<int64_t>() !=
                        postings.assessor_payouts[i].amount_micros) {
                        diverge(rid, "assessor_payouts", "amount mismatch at index " +
                                                             std::to_string(i));
                        break;
                    }
                }
                break;
            }
        }
    }
    return report;
}

}  // namespace consensus
}  // namespace pqml
