#pragma once

#include <map>
#include <string>
#include <vector>

#include "pqml/consensus.hpp"
#include "pqml/scheduler.hpp"
#include "pqml/scoring.hpp"

namespace pqml {

struct LatencyModel {
    enum class Kind { Constant, Uniform, LogNormal } kind = Kind::Constant;
    // Constant: a = latency ms. Uniform: [a, b] ms.
    // LogNormal: a = mean ms of the draw, b = sigma of the underlying normal.
    double a = 10.0;
    double b = 0.0;

    int64_t draw_us(DetStream& stream) const;
    double mean_ms() const;

    static LatencyModel from_json(const Json& j);
    Json to_json() const;
};

struct InferenceNodeSpec {
    uint32_t count = 1;
    InferenceStrategy strategy = UseModelStrategy{};
    LatencyModel latency;
};

struct AssessorNodeSpec {
    uint32_t count = 1;
    AssessorStrategy strategy = HonestStrategy{};
    LatencyModel latency;
};

struct Interarrival {
    enum class Kind { Fixed, Exponential } kind = Kind::Fixed;
    double mean_ms = 100.0;
};

struct Scenario {
    uint64_t seed = 0;
    uint32_t duration_queries = 100;
    ScoreDomain domain;
    MarketConfig market;
    RewardParams reward;
    double rho = 0.1;                 // assessment budget fraction of bounty
    int64_t bounty_micros = 20 * kMicroScale;
    SchedulerParams scheduler;
    double delta = 1.0;
    Interarrival interarrival;
    std::vector<InferenceNodeSpec> inference_nodes;
    std::vector<AssessorNodeSpec> assessor_nodes;
    double network_hop_ms = 5.0;
    double commit_deadline_factor = 10.0;  // x mean assessor latency
    double reveal_deadline_factor = 5.0;
    SealScheme seal_scheme = SealScheme::HashCommit;
    uint32_t max_attempts = 3;

    void validate() const;
    static Scenario from_json(const Json& j);
    static Scenario from_file(const std::string& path);
};

struct RoundMetrics {
    uint64_t round_id = 0;
    uint64_t query_id = 0;
    uint32_t attempt = 1;
    int64_t arrival_us = 0;
    int64_t finalized_us = 0;  // 0 when aborted
    bool aborted = false;
    int64_t consensus_micros = 0;
    uint64_t inference_node = 0;
    double chi = 0.0;
    int64_t inference_payout_micros = 0;

    double latency_ms() const {
        return static_cast<double>(finalized_us - arrival_us) / 1000.0;
    }
};

struct NodeMetrics {
    NodeId node;
    int64_t reward_micros = 0;
    int64_t cost_micros = 0;
    uint64_t assignments = 0;

    int64_t profit_micros() const { return reward_micros - cost_micros; }
};

struct MetricsReport {
    std::vector<RoundMetrics> rounds;
    std::map<uint64_t, NodeMetrics> nodes;
    uint64_t finalized = 0;
    uint64_t aborts = 0;
    uint64_t failed_queries = 0;
    double mean_latency_ms = 0.0;
    double median_latency_ms = 0.0;
    double p95_latency_ms = 0.0;
    double assessor_compute_mean_ms = 0.0;
    double consensus_score_variance = 0.0;
    int64_t total_bounty_micros = 0;
    int64_t total_paid_micros = 0;  // inference + assessors + returned remainder

    std::string to_csv() const;
    Json summary_json() const;
};

// Runs the full deterministic discrete-event simulation. When out_dir is
// non-empty, writes ledger.jsonl, metrics.csv and summary.json there.
MetricsReport run(const Scenario& scenario, const std::string& out_dir = "");

struct KSweepRow {
    uint32_t k = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double assessor_mean_ms = 0.0;
};

// One run per k, with a seed derived per k. CSV columns:
// k,mean_ms,median_ms,p95_ms,assessor_mean_ms
std::vector<KSweepRow> sweep_k(const Scenario& base, const std::vector<uint32_t>& ks);
std::string k_sweep_csv(const std::vector<KSweepRow>& rows);

struct StrategyProfit {
    std::string name;
    int64_t total_profit_micros = 0;
    double mean_profit_per_query = 0.0;  // reward units
    double profit_std_error = 0.0;       // Monte-Carlo SE of the mean
    double mean_chi = 0.0;
};

struct Theorem1Result {
    std::vector<StrategyProfit> strategies;
    size_t best_index = 0;
    bool costliest_model_wins = false;
};

// Runs the scenario once per inference strategy (every market model plus
// FreeRide) with identical seeds and reports per-strategy profit.
Theorem1Result theorem1_experiment(const Scenario& base,
                                   const FreeRideStrategy& free_ride);

struct Theorem2Result {
    double beta = 0.0;
    double mean_guesser_share = 0.0;
    double std_error = 0.0;
    double epsilon = 0.0;
    double jensen_bound = 0.0;  // guesser_expected_share at this beta
    uint64_t rounds = 0;
    bool within_bound = false;  // mean <= epsilon + 3 * SE
};

// Monte-Carlo estimate of a guesser's expected share among k-1 honest
// assessors whose scores agree exactly each round.
Theorem2Result theorem2_experiment(uint64_t seed, double beta, double delta,
                                   double epsilon, uint32_t k, uint64_t rounds,
                                   const ScoreDomain& domain);

}  // namespace pqml
