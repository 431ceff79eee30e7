#include "pqml/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pqml {

int64_t consensus_mean_micros(const std::vector<QualityScore>& scores) {
    if (scores.empty()) {
        throw std::invalid_argument("consensus_mean_micros: empty score list");
    }
    int64_t sum = 0;
    for (const auto& s : scores) sum += s.micros;
    return div_half_even(sum, static_cast<int64_t>(scores.size()));
}

double inference_reward(const std::vector<QualityScore>& scores,
                        const RewardParams& params, const ScoreDomain& domain) {
    params.validate();
    if (scores.empty()) {
        throw std::invalid_argument("inference_reward: empty score list");
    }
    for (const auto& s : scores) {
        if (!domain.contains(s.micros)) {
            throw std::domain_error("inference_reward: score outside domain");
        }
    }
    int64_t mean = consensus_mean_micros(scores);
    double gap = micros_to_double(domain.upper_micros - mean);
    return std::exp(-params.alpha * gap);
}

ShareVector assessor_shares(const std::vector<QualityScore>& scores, double beta) {
    if (scores.empty()) {
        throw std::invalid_argument("assessor_shares: empty score list");
    }
    if (beta < 0) {
        throw std::invalid_argument("assessor_shares: beta must be >= 0");
    }
    const size_t k = scores.size();
    int64_t sum = 0;
    for (const auto& s : scores) sum += s.micros;
    // Deviations from the mean carried as exact integer numerators
    // (k*s_i - sum), so equal distances give exactly equal shares.
    const double scale = static_cast<double>(k) * static_cast<double>(kMicroScale);
    std::vector<double> exponents(k);
    double max_exp = -HUGE_VAL;
    for (size_t i = 0; i < k; ++i) {
        auto num = static_cast<double>(static_cast<int64_t>(k) * scores[i].micros - sum);
        double dev = num / scale;
        exponents[i] = -beta * dev * dev;
        max_exp = std::max(max_exp, exponents[i]);
    }
    double z = 0.0;
    std::vector<double> weights(k);
    for (size_t i = 0; i < k; ++i) {
        weights[i] = std::exp(exponents[i] - max_exp);
        z += weights[i];
    }
    ShareVector out;
    out.shares.resize(k);
    for (size_t i = 0; i < k; ++i) {
        out.shares[i] = weights[i] / z;
    }
    return out;
}

AlphaThreshold alpha_threshold(const MarketConfig& market) {
    AlphaThreshold result;
    for (size_t j = 0; j < market.models.size(); ++j) {
        for (size_t l = j + 1; l < market.models.size(); ++l) {
            const auto& hi = market.models[j];  // non-ascending cost order
            const auto& lo = market.models[l];
            double e_gap = micros_to_double(hi.expected_quality_micros -
                                            lo.expected_quality_micros);
            double c_gap = micros_to_double(hi.cost_micros - lo.cost_micros);
            if (c_gap <= 0 || e_gap <= 0) {
                result.skipped.push_back({hi.id, lo.id, 0.0});
                continue;
            }
            double alpha_jl = std::log(e_gap) / c_gap;
            result.pairs.push_back({hi.id, lo.id, alpha_jl});
            result.theta = std::max(result.theta, alpha_jl);
        }
    }
    result.no_eligible_pair = result.pairs.empty();
    return result;
}

double beta_bound(double delta, double epsilon, uint32_t k) {
    if (delta <= 0) throw std::invalid_argument("beta_bound: delta must be > 0");
    if (!(epsilon > 0 && epsilon < 1)) {
        throw std::invalid_argument("beta_bound: epsilon must be in (0,1)");
    }
    if (k < 2) throw std::invalid_argument("beta_bound: k must be >= 2");
    double denom = 1.0 / epsilon - 1.0;
    return std::log(static_cast<double>(k - 1) / denom) / delta;
}

double guesser_expected_share(double beta, double delta, uint32_t k) {
    if (beta < 0) throw std::invalid_argument("guesser_expected_share: beta must be >= 0");
    if (delta < 0) throw std::invalid_argument("guesser_expected_share: delta must be >= 0");
    if (k < 2) throw std::invalid_argument("guesser_expected_share: k must be >= 2");
    return 1.0 / (1.0 + static_cast<double>(k - 1) * std::exp(-beta * delta));
}

std::vector<RewardHistogram> reward_distribution(
    const std::vector<QualityScore>& samples, const std::vector<double>& alphas,
    const ScoreDomain& domain, uint32_t bins) {
    if (samples.empty()) {
        throw std::invalid_argument("reward_distribution: empty sample list");
    }
    if (bins < 1) {
        throw std::invalid_argument("reward_distribution: bins must be >= 1");
    }
    std::vector<RewardHistogram> out;
    for (double alpha : alphas) {
        RewardParams params;
        params.alpha = alpha;
        RewardHistogram hist;
        hist.alpha = alpha;
        hist.counts.assign(bins, 0);
        double total = 0.0;
        for (const auto& s : samples) {
            double chi = inference_reward({s}, params, domain);
            total += chi;
            auto bucket = static_cast<size_t>(chi * bins);
            if (bucket >= bins) bucket = bins - 1;  // chi == 1 lands in the top bucket
            hist.counts[bucket] += 1;
        }
        hist.mean_reward = total / static_cast<double>(samples.size());
        out.push_back(std::move(hist));
    }
    return out;
}

std::string reward_distribution_csv(const std::vector<RewardHistogram>& hists,
                                    uint32_t bins) {
    std::ostringstream os;
    os << "alpha,bucket_low,bucket_high,count,mean_reward\n";
    for (const auto& h : hists) {
        for (uint32_t b = 0; b < bins; ++b) {
            double lo = static_cast<double>(b) / bins;
            double hi = static_cast<double>(b + 1) / bins;
            os << h.alpha << ',' << lo << ',' << hi << ',' << h.counts[b] << ','
               << h.mean_reward << '\n';
        }
    }
    return os.str();
}

}  // namespace pqml
