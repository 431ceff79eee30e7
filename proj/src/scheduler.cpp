#include "pqml/scheduler.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace pqml {

Scheduler::Scheduler(std::vector<NodeState> inference_pool,
                     std::vector<NodeState> assessor_pool, SchedulerParams params)
    : inference_pool_(std::move(inference_pool)),
      assessor_pool_(std::move(assessor_pool)),
      params_(params) {
    std::unordered_set<uint64_t> seen;
    for (const auto& pool : {inference_pool_, assessor_pool_}) {
        for (const auto& n : pool) {
            if (!seen.insert(n.node.id).second) {
                throw std::invalid_argument("Scheduler: pools share node id " +
                                            std::to_string(n.node.id));
            }
        }
    }
}

void Scheduler::accrue(std::vector<NodeState>& pool) {
    for (auto& n : pool) {
        n.energy_micros += n.step_micros;
        n.queries_since_assignment += 1;
        if (n.queries_since_assignment > params_.waiting_threshold &&
            !n.waiting_bonus_active) {
            n.step_micros += params_.bonus_micros;
            n.waiting_bonus_active = true;
        }
    }
}

std::vector<size_t> Scheduler::select_top(std::vector<NodeState>& pool,
                                          uint32_t count) {
    std::vector<size_t> order(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (pool[a].energy_micros != pool[b].energy_micros) {
            return pool[a].energy_micros > pool[b].energy_micros;
        }
        return pool[a].join_order < pool[b].join_order;
    });
    order.resize(count);
    for (size_t idx : order) {
        NodeState& n = pool[idx];
        n.energy_micros = 0;
        n.queries_since_assignment = 0;
        if (n.waiting_bonus_active) {
            n.step_micros -= params_.bonus_micros;
            n.waiting_bonus_active = false;
        }
    }
    return order;
}

Assignment Scheduler::on_query_arrival(uint32_t assessor_count) {
    if (inference_pool_.empty()) {
        throw std::invalid_argument("Scheduler: inference pool is empty");
    }
    if (assessor_pool_.size() < assessor_count) {
        throw std::invalid_argument("Scheduler: assessor pool smaller than m");
    }
    accrue(inference_pool_);
    accrue(assessor_pool_);

    Assignment out;
    auto inf = select_top(inference_pool_, 1);
    out.inference = inference_pool_[inf[0]].node;
    for (size_t idx : select_top(assessor_pool_, assessor_count)) {
        out.assessors.push_back(assessor_pool_[idx].node);
    }
    return out;
}

NodeState* Scheduler::find(const NodeId& node) {
    for (auto& n : inference_pool_) {
        if (n.node == node) return &n;
    }
    for (auto& n : assessor_pool_) {
        if (n.node == node) return &n;
    }
    return nullptr;
}

void Scheduler::on_task_outcome(const NodeId& node, bool performed_well) {
    NodeState* n = find(node);
    if (n == nullptr) {
        throw std::invalid_argument("Scheduler: unknown node " + to_string(node));
    }
    if (performed_well) {
        n->step_micros = div_half_even(n->step_micros * 3, 2);
        if (params_.step_cap_micros) {
            n->step_micros = std::min(n->step_micros, *params_.step_cap_micros);
        }
    } else {
        n->step_micros = kMicroScale;
    }
    // A waiting bonus, if any, was already removed at selection time.
}

}  // namespace pqml
