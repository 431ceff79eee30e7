#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pqml/fixed_point.hpp"

namespace pqml {

// Closed score interval [lower, upper] in micro-units. Defaults to [0, 10].
struct ScoreDomain {
    int64_t lower_micros = 0;
    int64_t upper_micros = 10 * kMicroScale;

    bool contains(int64_t micros) const {
        return micros >= lower_micros && micros <= upper_micros;
    }
    int64_t width_micros() const { return upper_micros - lower_micros; }
    void validate() const {
        if (lower_micros >= upper_micros) {
            throw std::invalid_argument("ScoreDomain: lower must be < upper");
        }
    }
};

struct QualityScore {
    int64_t micros = 0;

    double value() const { return micros_to_double(micros); }
    auto operator<=>(const QualityScore&) const = default;
};

enum class NodeRole : uint8_t { Management = 0, Inference = 1, Assessor = 2 };

struct NodeId {
    uint64_t id = 0;
    NodeRole role = NodeRole::Management;

    auto operator<=>(const NodeId&) const = default;
};

std::string to_string(NodeRole role);
std::string to_string(const NodeId& node);

using ModelProfileId = uint64_t;

struct QueryRecord {
    uint64_t query_id = 0;
    std::string payload;
    int64_t arrival_time_us = 0;
    int64_t bounty_micros = 0;  // reward units, micro fixed point
};

struct ResponseRecord {
    uint64_t query_id = 0;
    NodeId responder;
    std::string payload;
    int64_t produced_time_us = 0;
    ModelProfileId declared_model = 0;
};

struct ModelProfile {
    ModelProfileId id = 0;
    int64_t expected_quality_micros = 0;  // e_j, in the score domain
    int64_t cost_micros = 0;              // c_j, reward units per query
    int64_t quality_stddev_micros = 0;    // synthetic scorer spread
};

// Models sorted non-ascending by cost; guaranteed free of domination.
struct MarketConfig {
    std::vector<ModelProfile> models;

    const ModelProfile& profile(ModelProfileId id) const;
};

struct RewardParams {
    double alpha = 1.0;  // inference reward decay
    double beta = 0.0;   // assessment concentration
    uint32_t k = 1;      // scores required for consensus
    uint32_t m = 1;      // assessors assigned (m >= k)

    void validate() const {
        if (alpha <= 0) throw std::invalid_argument("RewardParams: alpha must be > 0");
        if (beta < 0) throw std::invalid_argument("RewardParams: beta must be >= 0");
        if (k < 1 || m < k) throw std::invalid_argument("RewardParams: need 1 <= k <= m");
    }
};

// Affine map of a raw scorer output in [-1,1] onto the score domain.
QualityScore normalize_score(double raw, const ScoreDomain& domain);

// Sorts models non-ascending by cost and rejects any dominated model
// (one that is no better and no cheaper than another, strictly worse on
// at least one axis) or duplicate id.
MarketConfig validate_market(std::vector<ModelProfile> models);

}  // namespace pqml
