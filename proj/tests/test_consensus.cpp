#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pqml/consensus.hpp"
#include "pqml/sim.hpp"

using namespace pqml;
using namespace pqml::consensus;
namespace fs = std::filesystem;

namespace {

NodeId assessor(uint64_t id) { return NodeId{id, NodeRole::Assessor}; }

struct RoundFixture {
    ConsensusRound round;
    std::vector<SealResult> seals;  // index = assessor id - 1

    RoundFixture(uint32_t m, uint32_t k, const std::vector<double>& scores) {
        round.round_id = 1;
        round.query_id = 1;
        round.inference_node = NodeId{100, NodeRole::Inference};
        round.k = k;
        round.phase = RoundPhase::Commit;
        round.deadline_commit_us = 1'000'000;
        round.deadline_reveal_us = 2'000'000;
        DetStream stream(99, "consensus-test");
        for (uint32_t i = 0; i < m; ++i) {
            round.assigned_assessors.push_back(assessor(i + 1));
            QualityScore s{micros_from_double(scores[i % scores.size()])};
            seals.push_back(seal(s, round.round_id, assessor(i + 1),
                                 stream.next_bytes32()));
        }
    }

    CommitOutcome commit(uint32_t id, int64_t t) {
        return on_commit(round, seals[id - 1].sealed, t);
    }
    RevealOutcome reveal(uint32_t id, int64_t t) {
        return on_reveal(round, seals[id - 1].reveal, t);
    }
};

}  // namespace

TEST_CASE("m=3 k=2: late third commit is excluded, consensus is the pair mean") {
    RoundFixture fx(3, 2, {7.0, 9.0, 5.0});

    CHECK_FALSE(fx.commit(1, 10).quorum_reached);
    auto second = fx.commit(2, 20);
    CHECK(second.quorum_reached);
    CHECK(fx.round.phase == RoundPhase::Reveal);
    REQUIRE(fx.round.included_set.size() == 2);
    CHECK(fx.round.included_set[0].id == 1);
    CHECK(fx.round.included_set[1].id == 2);

    auto late = fx.commit(3, 30);
    CHECK(late.excluded);
    CHECK(fx.round.phase == RoundPhase::Reveal);
    CHECK(fx.round.commit_of(assessor(3))->excluded);

    CHECK_FALSE(fx.reveal(1, 40).finalized);
    auto last = fx.reveal(2, 50);
    CHECK(last.finalized);
    CHECK(fx.round.phase == RoundPhase::Finalized);
    REQUIRE(fx.round.consensus_micros.has_value());
    CHECK(*fx.round.consensus_micros == 8'000'000);  // mean of 7.0 and 9.0, exactly

    // Reveal from the excluded node is recorded but never aggregated.
    auto ignored = fx.reveal(3, 60);
    CHECK(ignored.ignored);
    CHECK(*fx.round.consensus_micros == 8'000'000);
}

TEST_CASE("k=1: first commit fixes the included set") {
    RoundFixture fx(3, 1, {6.0});
    auto outcome = fx.commit(2, 5);
    CHECK(outcome.quorum_reached);
    REQUIRE(fx.round.included_set.size() == 1);
    CHECK(fx.round.included_set[0].id == 2);
}

TEST_CASE("equal commit times break ties by NodeId") {
    RoundFixture fx(3, 2, {5.0});
    fx.commit(3, 10);
    fx.commit(1, 10);
    REQUIRE(fx.round.included_set.size() == 2);
    CHECK(fx.round.included_set[0].id == 1);
    CHECK(fx.round.included_set[1].id == 3);
}

TEST_CASE("protocol violations: unknown sender and duplicate commit") {
    RoundFixture fx(2, 2, {5.0});
    fx.commit(1, 10);
    CHECK_THROWS_AS(fx.commit(1, 20), ProtocolViolation);

    auto stranger = seal(QualityScore{1}, fx.round.round_id, assessor(77),
                         std::array<uint8_t, 32>{});
    CHECK_THROWS_AS(on_commit(fx.round, stranger.sealed, 30), ProtocolViolation);
}

TEST_CASE("commit after the deadline is excluded even below quorum") {
    RoundFixture fx(3, 2, {5.0});
    fx.commit(1, 10);
    auto late = fx.commit(2, 1'500'000);
    CHECK(late.excluded);
    CHECK(fx.round.phase == RoundPhase::Commit);  // still short of quorum
}

TEST_CASE("k=3 consensus of 5,5,8 is 6.000000") {
    RoundFixture fx(3, 3, {5.0, 5.0, 8.0});
    fx.commit(1, 10);
    fx.commit(2, 20);
    fx.commit(3, 30);
    fx.reveal(1, 40);
    fx.reveal(2, 50);
    CHECK(fx.reveal(3, 60).finalized);
    CHECK(*fx.round.consensus_micros == 6'000'000);
}

TEST_CASE("mutated reveal aborts the round and flags the assessor") {
    RoundFixture fx(2, 2, {7.0, 9.0});
    fx.commit(1, 10);
    fx.commit(2, 20);
    fx.reveal(1, 30);

    auto tampered = fx.seals[1].reveal;
    tampered.score.micros += 1;
    auto outcome = on_reveal(fx.round, tampered, 40);
    CHECK(outcome.aborted);
    CHECK_FALSE(outcome.valid);
    CHECK(fx.round.phase == RoundPhase::Aborted);
    REQUIRE(fx.round.misbehaving.size() == 1);
    CHECK(fx.round.misbehaving[0].id == 2);
    CHECK_FALSE(fx.round.consensus_micros.has_value());
}

TEST_CASE("timeouts abort under-quorum phases") {
    SUBCASE("commit phase short of k") {
        RoundFixture fx(3, 3, {5.0});
        fx.commit(1, 10);
        CHECK_FALSE(on_timeout(fx.round, 999'999));
        CHECK(on_timeout(fx.round, 1'000'001));
        CHECK(fx.round.phase == RoundPhase::Aborted);
    }
    SUBCASE("reveal phase short of k valid reveals") {
        RoundFixture fx(3, 2, {5.0});
        fx.commit(1, 10);
        fx.commit(2, 20);
        fx.reveal(1, 30);
        CHECK_FALSE(on_timeout(fx.round, 1'999'999));
        CHECK(on_timeout(fx.round, 2'000'001));
        CHECK(fx.round.phase == RoundPhase::Aborted);
    }
    SUBCASE("over-provisioning absorbs silent assessors") {
        RoundFixture fx(5, 3, {6.0});
        fx.commit(1, 10);
        fx.commit(4, 20);
        fx.commit(5, 30);  // assessors 2 and 3 stay silent
        fx.reveal(1, 40);
        fx.reveal(4, 50);
        CHECK(fx.reveal(5, 60).finalized);
        CHECK_FALSE(on_timeout(fx.round, 5'000'000));
    }
}

TEST_CASE("excluded node timing never changes the consensus") {
    auto consensus_with_late_commit = [](int64_t late_time) {
        RoundFixture fx(3, 2, {7.0, 9.0, 1.0});
        fx.commit(1, 10);
        fx.commit(2, 20);
        fx.commit(3, late_time);
        fx.reveal(1, late_time + 10);
        fx.reveal(2, late_time + 20);
        return *fx.round.consensus_micros;
    };
    CHECK(consensus_with_late_commit(25) == consensus_with_late_commit(900'000));
}

TEST_CASE("finalize_rewards splits the bounty exactly") {
    RewardParams params;
    params.alpha = 0.5;
    params.beta = 1.0;
    params.k = 3;
    params.m = 3;
    const int64_t bounty = 20 * kMicroScale;
    const ScoreDomain domain;

    SUBCASE("all scores at the top: full bounty to inference") {
        RoundFixture fx(3, 3, {10.0});
        for (uint32_t i = 1; i <= 3; ++i) fx.commit(i, 10 * i);
        for (uint32_t i = 1; i <= 3; ++i) fx.reveal(i, 100 + i);
        auto postings = finalize_rewards(fx.round, params, 0.1, bounty, domain);
        CHECK(postings.chi == 1.0);
        CHECK(postings.inference_payout_micros == bounty);
        CHECK(postings.returned_remainder_micros == 0);
        CHECK(postings.assessor_budget_micros == 2 * kMicroScale);
        int64_t total = 0;
        int64_t lo = INT64_MAX, hi = INT64_MIN;
        for (const auto& p : postings.assessor_payouts) {
            total += p.amount_micros;
            lo = std::min(lo, p.amount_micros);
            hi = std::max(hi, p.amount_micros);
        }
        CHECK(total == 2 * kMicroScale);  // rho * bounty, conserved exactly
        CHECK(hi - lo <= 1);              // equal shares up to one micro-unit
    }

    SUBCASE("excluded assessor earns nothing") {
        RoundFixture fx(3, 2, {7.0, 9.0, 5.0});
        fx.commit(1, 10);
        fx.commit(2, 20);
        fx.commit(3, 30);
        fx.reveal(1, 40);
        fx.reveal(2, 50);
        RewardParams p2 = params;
        p2.k = 2;
        auto postings = finalize_rewards(fx.round, p2, 0.1, bounty, domain);
        REQUIRE(postings.assessor_payouts.size() == 2);
        for (const auto& posting : postings.assessor_payouts) {
            CHECK(posting.node.id != 3);
        }
    }

    SUBCASE("conservation over random rounds") {
        DetStream stream(17, "reward-conserve");
        for (int trial = 0; trial < 300; ++trial) {
            uint32_t k = 1 + static_cast<uint32_t>(stream.next_u64() % 7);
            std::vector<double> scores;
            for (uint32_t i = 0; i < k; ++i) scores.push_back(stream.uniform(0, 10));
            RoundFixture fx(k, k, scores);
            for (uint32_t i = 1; i <= k; ++i) fx.commit(i, 10 * i);
            for (uint32_t i = 1; i <= k; ++i) fx.reveal(i, 1000 + i);
            REQUIRE(fx.round.phase == RoundPhase::Finalized);

            RewardParams pk = params;
            pk.k = pk.m = k;
            double rho = stream.uniform(0.01, 0.5);
            int64_t b = 1 + static_cast<int64_t>(stream.next_u64() % (50 * kMicroScale));
            auto postings = finalize_rewards(fx.round, pk, rho, b, domain);

            int64_t assessor_total = 0;
            for (const auto& p : postings.assessor_payouts) {
                CHECK(p.amount_micros >= 0);
                assessor_total += p.amount_micros;
            }
            CHECK(assessor_total == postings.assessor_budget_micros);
            CHECK(postings.inference_payout_micros +
                      postings.returned_remainder_micros == b);
            CHECK(postings.inference_payout_micros + assessor_total +
                      postings.returned_remainder_micros ==
                  b + postings.assessor_budget_micros);
        }
    }

    SUBCASE("requires a finalized round") {
        RoundFixture fx(3, 3, {5.0});
        fx.commit(1, 10);
        CHECK_THROWS_AS(finalize_rewards(fx.round, params, 0.1, bounty, domain),
                        std::logic_error);
    }
}

namespace {

Scenario small_scenario() {
    Scenario sc;
    sc.seed = 7;
    sc.duration_queries = 20;
    ModelProfile model;
    model.id = 1;
    model.expected_quality_micros = 7 * kMicroScale;
    model.cost_micros = 2 * kMicroScale;
    model.quality_stddev_micros = kMicroScale;
    sc.market = validate_market({model});
    sc.reward.alpha = 0.5;
    sc.reward.beta = 1.0;
    sc.reward.k = 2;
    sc.reward.m = 3;
    sc.inference_nodes.push_back({1, UseModelStrategy{1}, LatencyModel{}});
    sc.assessor_nodes.push_back({3, HonestStrategy{}, LatencyModel{}});
    return sc;
}

// Rewrites the ledger with one record body mutated, recomputing the chain so
// only the audit (not verify-chain) can catch the tampering.
void tamper_and_rechain(const std::string& path, RecordKind kind,
                        const std::function<void(Json&)>& mutate) {
    auto records = read_ledger(path);
    bool done = false;
    LedgerWriter writer(path);
    for (auto& rec : records) {
        if (!done && rec.kind == kind) {
            mutate(rec.body);
            done = true;
        }
        writer.append(rec.kind, rec.body, rec.time_us);
    }
    writer.flush();
    REQUIRE(done);
}

}  // namespace

TEST_CASE("audit_replay matches a pristine simulation ledger") {
    auto dir = fs::temp_directory_path() / "pqml-audit-ok";
    fs::create_directories(dir);
    auto sc = small_scenario();
    run(sc, dir.string());

    AuditParams params;
    params.alpha = sc.reward.alpha;
    params.beta = sc.reward.beta;
    params.rho = sc.rho;
    params.domain = sc.domain;
    auto report = audit_replay((dir / "ledger.jsonl").string(), params);
    CHECK(report.rounds_checked == 20);
    CHECK(report.divergences.empty());
    fs::remove_all(dir);
}

TEST_CASE("audit_replay flags a tampered consensus even on a valid chain") {
    auto dir = fs::temp_directory_path() / "pqml-audit-tamper";
    fs::create_directories(dir);
    auto sc = small_scenario();
    run(sc, dir.string());
    auto path = (dir / "ledger.jsonl").string();

    tamper_and_rechain(path, RecordKind::RoundFinalized, [](Json& body) {
        body["consensus_micros"] = body["consensus_micros"].get<int64_t>() + 1;
    });
    CHECK(verify_chain(path).ok);  // chain is intact; contents lie

    AuditParams params;
    params.alpha = sc.reward.alpha;
    params.beta = sc.reward.beta;
    params.rho = sc.rho;
    params.domain = sc.domain;
    auto report = audit_replay(path, params);
    CHECK(report.divergences.size() >= 1);
    CHECK(report.divergences[0].field == "consensus_micros");
    fs::remove_all(dir);
}

TEST_CASE("audit_replay flags a tampered reward posting") {
    auto dir = fs::temp_directory_path() / "pqml-audit-reward";
    fs::create_directories(dir);
    auto sc = small_scenario();
    run(sc, dir.string());
    auto path = (dir / "ledger.jsonl").string();

    tamper_and_rechain(path, RecordKind::RewardsDistributed, [](Json& body) {
        body["inference_payout_micros"] =
            body["inference_payout_micros"].get<int64_t>() + 5;
    });

    AuditParams params;
    params.alpha = sc.reward.alpha;
    params.beta = sc.reward.beta;
    params.rho = sc.rho;
    params.domain = sc.domain;
    auto report = audit_replay(path, params);
    CHECK(report.divergences.size() >= 1);
    fs::remove_all(dir);
}
