#include "pqml/domain.hpp"

#include <algorithm>
#include <unordered_set>

namespace pqml {

std::string to_string(NodeRole role) {
    switch (role) {
        case NodeRole::Management: return "management";
        case NodeRole::Inference: return "inference";
        case NodeRole::Assessor: return "assessor";
    }
    return "unknown";
}

std::string to_string(const NodeId& node) {
    return to_string(node.role) + "-" + std::to_string(node.id);
}

const ModelProfile& MarketConfig::profile(ModelProfileId id) const {
    for (const auto& m : models) {
        if (m.id == id) return m;
    }
    throw std::invalid_argument("MarketConfig: unknown model id " + std::to_string(id));
}

QualityScore normalize_score(double raw, const ScoreDomain& domain) {
    domain.validate();
    if (!(raw >= -1.0 && raw <= 1.0)) {
        throw std::domain_error("normalize_score: raw score outside [-1,1]");
    }
    double offset = (raw + 1.0) / 2.0 * static_cast<double>(domain.width_micros());
    int64_t micros =
        domain.lower_micros + static_cast<int64_t>(std::nearbyint(offset));
    return QualityScore{micros};
}

MarketConfig validate_market(std::vector<ModelProfile> models) {
    if (models.empty()) {
        throw std::invalid_argument("validate_market: empty model list");
    }
    std::unordered_set<ModelProfileId> ids;
    for (const auto& m : models) {
        if (!ids.insert(m.id).second) {
            throw std::invalid_argument("validate_market: duplicate model id " +
                                        std::to_string(m.id));
        }
        if (m.cost_micros < 0) {
            throw std::invalid_argument("validate_market: negative cost for model " +
                                        std::to_string(m.id));
        }
        if (m.quality_stddev_micros < 0) {
            throw std::invalid_argument("validate_market: negative stddev for model " +
                                        std::to_string(m.id));
        }
    }
    for (size_t j = 0; j < models.size(); ++j) {
        for (size_t l = 0; l < models.size(); ++l) {
            if (j == l) continue;
            const auto& a = models[j];
            const auto& b = models[l];
            bool weakly_better = a.expected_quality_micros >= b.expected_quality_micros &&
                                 a.cost_micros <= b.cost_micros;
            bool strictly = a.expected_quality_micros > b.expected_quality_micros ||
                            a.cost_micros < b.cost_micros;
            if (weakly_better && strictly) {
                throw std::invalid_argument(
                    "validate_market: model " + std::to_string(a.id) +
                    " dominates model " + std::to_string(b.id));
            }
        }
    }
    std::stable_sort(models.begin(), models.end(),
                     [](const ModelProfile& a, const ModelProfile& b) {
                         return a.cost_micros > b.cost_micros;
                     });
    return MarketConfig{std::move(models)};
}

}  // namespace pqml
