#include <doctest.h>

#include "pqml/scheduler.hpp"

using namespace pqml;

namespace {

NodeState make_node(uint64_t id, NodeRole role, uint32_t join_order,
                    int64_t energy_micros = 0, int64_t step_micros = kMicroScale) {
    NodeState n;
    n.node = NodeId{id, role};
    n.join_order = join_order;
    n.energy_micros = energy_micros;
    n.step_micros = step_micros;
    return n;
}

std::vector<NodeState> fresh_pool(NodeRole role, uint32_t count,
                                  uint64_t first_id = 1) {
    std::vector<NodeState> pool;
    for (uint32_t i = 0; i < count; ++i) {
        pool.push_back(make_node(first_id + i, role, i));
    }
    return pool;
}

int64_t micros(double v) { return micros_from_double(v); }

}  // namespace

TEST_CASE("hand-computed four-node replay with waiting bonus") {
    // T=2, B=1: node A starts at the top with energy 10 and is picked first;
    // a good outcome grows its step 50%; idle nodes C, D, then A collect the
    // waiting bonus; the bonus is removed again at selection.
    SchedulerParams params;
    params.waiting_threshold = 2;
    params.bonus_micros = kMicroScale;

    std::vector<NodeState> pool{
        make_node(1, NodeRole::Inference, 0, micros(10)),
        make_node(2, NodeRole::Inference, 1, micros(8)),
        make_node(3, NodeRole::Inference, 2, micros(5)),
        make_node(4, NodeRole::Inference, 3, micros(0)),
    };
    Scheduler sched(pool, {}, params);
    auto state = [&](size_t i) { return sched.inference_pool()[i]; };

    // Query 1: accrual lifts A to 11; A wins and resets to 0.
    CHECK(sched.on_query_arrival(0).inference.id == 1);
    CHECK(state(0).energy_micros == 0);
    CHECK(state(1).energy_micros == micros(9));
    CHECK(state(2).energy_micros == micros(6));
    CHECK(state(3).energy_micros == micros(1));

    // A performed well: step 1.0 -> 1.5.
    sched.on_task_outcome(NodeId{1, NodeRole::Inference}, true);
    CHECK(state(0).step_micros == micros(1.5));

    // Query 2: B reaches 10 and wins.
    CHECK(sched.on_query_arrival(0).inference.id == 2);
    CHECK(state(0).energy_micros == micros(1.5));
    CHECK(state(1).energy_micros == 0);

    // Query 3: C and D pass T=2 idle queries and gain the bonus (step +1);
    // C wins at energy 8 and sheds the bonus on selection.
    CHECK(sched.on_query_arrival(0).inference.id == 3);
    CHECK(state(2).energy_micros == 0);
    CHECK(state(2).step_micros == micros(1));
    CHECK_FALSE(state(2).waiting_bonus_active);
    CHECK(state(3).step_micros == micros(2));
    CHECK(state(3).waiting_bonus_active);

    // Query 4: D accrues at step 2 and overtakes everyone at energy 5;
    // A (idle 3 queries) gains its own bonus: step 1.5 -> 2.5.
    CHECK(sched.on_query_arrival(0).inference.id == 4);
    CHECK(state(3).energy_micros == 0);
    CHECK(state(3).step_micros == micros(1));
    CHECK(state(0).energy_micros == micros(4.5));
    CHECK(state(0).step_micros == micros(2.5));
    CHECK(state(0).waiting_bonus_active);

    // Query 5: A reaches 7.0 and wins again; the bonus is removed, leaving
    // the earned 1.5 step.
    CHECK(sched.on_query_arrival(0).inference.id == 1);
    CHECK(state(0).energy_micros == 0);
    CHECK(state(0).step_micros == micros(1.5));
    CHECK_FALSE(state(0).waiting_bonus_active);
}

TEST_CASE("fresh symmetric pool degenerates to round-robin in join order") {
    SchedulerParams params;
    params.waiting_threshold = 1000;  // keep the bonus out of the picture
    Scheduler sched(fresh_pool(NodeRole::Inference, 5), {}, params);
    for (int cycle = 0; cycle < 4; ++cycle) {
        for (uint64_t id = 1; id <= 5; ++id) {
            CHECK(sched.on_query_arrival(0).inference.id == id);
        }
    }
}

TEST_CASE("assessor selection takes the top m, ties by join order") {
    SchedulerParams params;
    params.waiting_threshold = 1000;
    Scheduler sched(fresh_pool(NodeRole::Inference, 1),
                    fresh_pool(NodeRole::Assessor, 5, 10), params);

    auto ids = [](const Assignment& a) {
        std::vector<uint64_t> out;
        for (const auto& n : a.assessors) out.push_back(n.id);
        return out;
    };
    CHECK(ids(sched.on_query_arrival(2)) == std::vector<uint64_t>{10, 11});
    CHECK(ids(sched.on_query_arrival(2)) == std::vector<uint64_t>{12, 13});
    // 14 leads at energy 3; 10 and 11 tie at 2 and 10 wins by join order.
    CHECK(ids(sched.on_query_arrival(2)) == std::vector<uint64_t>{14, 10});
}

TEST_CASE("selected node holds exactly its own step one query later") {
    SchedulerParams params;
    params.waiting_threshold = 1000;
    Scheduler sched(fresh_pool(NodeRole::Inference, 3), {}, params);
    auto first = sched.on_query_arrival(0).inference;
    sched.on_task_outcome(first, true);
    sched.on_query_arrival(0);
    for (const auto& n : sched.inference_pool()) {
        if (n.node == first) CHECK(n.energy_micros == n.step_micros);
    }
}

TEST_CASE("higher step overtakes from equal energy") {
    SchedulerParams params;
    params.waiting_threshold = 1000;
    std::vector<NodeState> pool{
        make_node(1, NodeRole::Inference, 0, 0, micros(1)),
        make_node(2, NodeRole::Inference, 1, 0, micros(1.5)),
    };
    Scheduler sched(pool, {}, params);
    // Node 2 accrues faster and wins despite the worse join order.
    CHECK(sched.on_query_arrival(0).inference.id == 2);
}

TEST_CASE("step outcomes compose multiplicatively and reset on failure") {
    SchedulerParams params;
    Scheduler sched(fresh_pool(NodeRole::Inference, 1), {}, params);
    NodeId node{1, NodeRole::Inference};

    sched.on_task_outcome(node, true);
    CHECK(sched.inference_pool()[0].step_micros == micros(1.5));
    sched.on_task_outcome(node, true);
    CHECK(sched.inference_pool()[0].step_micros == micros(2.25));
    sched.on_task_outcome(node, false);
    CHECK(sched.inference_pool()[0].step_micros == micros(1));
}

TEST_CASE("optional step cap limits compounding") {
    SchedulerParams params;
    params.step_cap_micros = micros(2);
    Scheduler sched(fresh_pool(NodeRole::Inference, 1), {}, params);
    NodeId node{1, NodeRole::Inference};
    for (int i = 0; i < 5; ++i) sched.on_task_outcome(node, true);
    CHECK(sched.inference_pool()[0].step_micros == micros(2));
}

TEST_CASE("no starvation: 50 nodes, 10000 queries") {
    SchedulerParams params;  // default T=10, B=1
    const uint32_t n = 50;
    Scheduler sched(fresh_pool(NodeRole::Inference, n), {}, params);

    std::vector<int> last_selected(n + 1, 0);
    for (int q = 1; q <= 10'000; ++q) {
        auto id = sched.on_query_arrival(0).inference.id;
        // Every gap between selections stays under 10 * n queries.
        CHECK(q - last_selected[id] <= 500);
        last_selected[id] = q;
    }
    for (uint64_t id = 1; id <= n; ++id) {
        CHECK(10'000 - last_selected[id] <= 500);
    }
}

TEST_CASE("determinism: identical state and events give identical selections") {
    SchedulerParams params;
    Scheduler a(fresh_pool(NodeRole::Inference, 7),
                fresh_pool(NodeRole::Assessor, 9, 100), params);
    Scheduler b(fresh_pool(NodeRole::Inference, 7),
                fresh_pool(NodeRole::Assessor, 9, 100), params);
    for (int q = 0; q < 200; ++q) {
        auto sa = a.on_query_arrival(3);
        auto sb = b.on_query_arrival(3);
        CHECK(sa.inference == sb.inference);
        CHECK(sa.assessors == sb.assessors);
        bool well = q % 3 == 0;
        a.on_task_outcome(sa.inference, well);
        b.on_task_outcome(sb.inference, well);
    }
}

TEST_CASE("configuration errors") {
    SchedulerParams params;
    // Pools must be disjoint by id.
    CHECK_THROWS_AS(Scheduler(fresh_pool(NodeRole::Inference, 2),
                              fresh_pool(NodeRole::Assessor, 2), params),
                    std::invalid_argument);

    Scheduler empty_inference({}, fresh_pool(NodeRole::Assessor, 3), params);
    CHECK_THROWS_AS(empty_inference.on_query_arrival(1), std::invalid_argument);

    Scheduler small(fresh_pool(NodeRole::Inference, 1),
                    fresh_pool(NodeRole::Assessor, 2, 10), params);
    CHECK_THROWS_AS(small.on_query_arrival(5), std::invalid_argument);
    CHECK_THROWS_AS(small.on_task_outcome(NodeId{99, NodeRole::Assessor}, true),
                    std::invalid_argument);
}
