#pragma once

#include <vector>

#include "pqml/domain.hpp"

namespace pqml {

// Normalized assessor reward shares: each in [0,1], summing to 1.
struct ShareVector {
    std::vector<double> shares;
};

// chi: exp(-alpha * (U - mean(s_i))). The mean is computed exactly in
// micro-units (half-to-even) before converting to a real.
double inference_reward(const std::vector<QualityScore>& scores,
                        const RewardParams& params, const ScoreDomain& domain);

// Exact fixed-point mean of the scores, half-to-even.
int64_t consensus_mean_micros(const std::vector<QualityScore>& scores);

// phi: softmax over -beta * (s_i - mean)^2, stabilized with max-exponent
// subtraction so it stays finite for exponents up to ~700.
ShareVector assessor_shares(const std::vector<QualityScore>& scores, double beta);

struct AlphaPair {
    ModelProfileId higher;  // costlier model F_j
    ModelProfileId lower;   // cheaper model F_l
    double alpha_jl;
};

struct AlphaThreshold {
    double theta = 0.0;
    std::vector<AlphaPair> pairs;          // eligible pairs and their bounds
    std::vector<AlphaPair> skipped;        // quality gap <= 0 or equal cost
    bool no_eligible_pair = false;         // warning: theta defaulted to 0
};

// Largest ln(e_j - e_l) / (c_j - c_l) over model pairs with c_j > c_l and
// e_j > e_l, clamped below at 0.
AlphaThreshold alpha_threshold(const MarketConfig& market);

// Beta threshold keeping a guessing assessor's expected share below epsilon:
// (1/delta) * ln((k-1) / (1/epsilon - 1)). May be negative; callers should
// warn that no non-negative beta meets epsilon in that case.
double beta_bound(double delta, double epsilon, uint32_t k);

// Upper bound on a guesser's expected share, the exact inverse of
// beta_bound: 1 / (1 + (k-1) * exp(-beta*delta)). Equals 1/k at beta = 0;
// the true share of an assessor whose score sits at least delta from the
// honest consensus never exceeds 1/k, so the bound is conservative.
double guesser_expected_share(double beta, double delta, uint32_t k);

struct RewardHistogram {
    double alpha = 0.0;
    std::vector<uint64_t> counts;  // `bins` equal-width buckets over [0,1]
    double mean_reward = 0.0;
};

// Per-alpha histograms of the single-score reward chi([s]) over [0,1].
std::vector<RewardHistogram> reward_distribution(
    const std::vector<QualityScore>& samples, const std::vector<double>& alphas,
    const ScoreDomain& domain, uint32_t bins);

// CSV rows: alpha,bucket_low,bucket_high,count,mean_reward
std::string reward_distribution_csv(const std::vector<RewardHistogram>& hists,
                                    uint32_t bins);

}  // namespace pqml
