#pragma once

#include <optional>
#include <vector>

#include "pqml/domain.hpp"

namespace pqml {

// Per-node bookkeeping for deterministic energy/step selection. Energy and
// step are micro fixed point; a fresh node starts at energy 0, step 1.
struct NodeState {
    NodeId node;
    int64_t energy_micros = 0;
    int64_t step_micros = kMicroScale;
    bool waiting_bonus_active = false;
    uint32_t queries_since_assignment = 0;
    uint32_t join_order = 0;
};

struct SchedulerParams {
    uint32_t waiting_threshold = 10;             // T, in queries
    int64_t bonus_micros = kMicroScale;          // B, added to step
    int64_t gamma_micros = 7 * kMicroScale;      // "performed well" score bar
    std::optional<int64_t> step_cap_micros;      // optional compounding cap
};

struct Assignment {
    NodeId inference;
    std::vector<NodeId> assessors;
};

// Two disjoint pools updated lazily, once per query arrival: every node
// accrues energy by its step, idle nodes past T gain the waiting bonus,
// then the highest-energy nodes are selected (ties by join order) and
// reset.
class Scheduler {
public:
    Scheduler(std::vector<NodeState> inference_pool,
              std::vector<NodeState> assessor_pool, SchedulerParams params);

    Assignment on_query_arrival(uint32_t assessor_count);

    // performed_well: step gains 50%; otherwise it falls back to 1.
    void on_task_outcome(const NodeId& node, bool performed_well);

    const std::vector<NodeState>& inference_pool() const { return inference_pool_; }
    const std::vector<NodeState>& assessor_pool() const { return assessor_pool_; }

private:
    void accrue(std::vector<NodeState>& pool);
    std::vector<size_t> select_top(std::vector<NodeState>& pool, uint32_t count);
    NodeState* find(const NodeId& node);

    std::vector<NodeState> inference_pool_;
    std::vector<NodeState> assessor_pool_;
    SchedulerParams params_;
};

}  // namespace pqml
