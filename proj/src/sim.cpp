#include "pqml/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace pqml {

namespace {

int64_t ms_to_us(double ms) {
    auto us = static_cast<int64_t>(std::nearbyint(ms * 1000.0));
    return std::max<int64_t>(us, 1);
}

int64_t parse_micros_field(const Json& j) {
    if (j.is_string()) return parse_micros(j.get<std::string>());
    if (j.is_number_integer()) {
        return j.get<int64_t>() * kMicroScale;
    }
    return micros_from_double(j.get<double>());
}

}  // namespace

int64_t LatencyModel::draw_us(DetStream& stream) const {
    switch (kind) {
        case Kind::Constant:
            return ms_to_us(a);
        case Kind::Uniform:
            return ms_to_us(stream.uniform(a, b));
        case Kind::LogNormal: {
            double sigma = b;
            double mu = std::log(a) - sigma * sigma / 2.0;  // a is the mean
            return ms_to_us(stream.lognormal(mu, sigma));
        }
    }
    return 1;
}

double LatencyModel::mean_ms() const { return kind == Kind::Uniform ? (a + b) / 2.0 : a; }

LatencyModel LatencyModel::from_json(const Json& j) {
    LatencyModel m;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
        m.kind = Kind::Constant;
        m.a = j.at("ms").get<double>();
    } else if (kind == "uniform") {
        m.kind = Kind::Uniform;
        m.a = j.at("lo_ms").get<double>();
        m.b = j.at("hi_ms").get<double>();
    } else if (kind == "lognormal") {
        m.kind = Kind::LogNormal;
        m.a = j.at("mean_ms").get<double>();
        m.b = j.value("sigma", 0.5);
    } else {
        throw std::invalid_argument("unknown latency model '" + kind + "'");
    }
    return m;
}

Json LatencyModel::to_json() const {
    Json j;
    switch (kind) {
        case Kind::Constant:
            j["kind"] = "constant";
            j["ms"] = a;
            break;
        case Kind::Uniform:
            j["kind"] = "uniform";
            j["lo_ms"] = a;
            j["hi_ms"] = b;
            break;
        case Kind::LogNormal:
            j["kind"] = "lognormal";
            j["mean_ms"] = a;
            j["sigma"] = b;
            break;
    }
    return j;
}

void Scenario::validate() const {
    domain.validate();
    reward.validate();
    if (market.models.empty()) {
        throw std::invalid_argument("Scenario: empty market");
    }
    if (rho < 0) throw std::invalid_argument("Scenario: rho must be >= 0");
    if (bounty_micros < 0) throw std::invalid_argument("Scenario: bounty must be >= 0");
    uint32_t assessors = 0;
    for (const auto& spec : assessor_nodes) assessors += spec.count;
    if (assessors < reward.m) {
        throw std::invalid_argument("Scenario: assessor population smaller than m");
    }
    if (inference_nodes.empty()) {
        throw std::invalid_argument("Scenario: no inference nodes");
    }
    for (const auto& spec : inference_nodes) {
        if (auto* use = std::get_if<UseModelStrategy>(&spec.strategy)) {
            market.profile(use->model);
        } else if (auto* down = std::get_if<DowngradeStrategy>(&spec.strategy)) {
            market.profile(down->declared);
            market.profile(down->actual);
        }
    }
}

namespace {

AssessorStrategy assessor_strategy_from_json(const Json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "honest") return HonestStrategy{};
    if (kind == "constant") return ConstantStrategy{parse_micros_field(j.at("value"))};
    if (kind == "late") return LateStrategy{ms_to_us(j.at("extra_delay_ms").get<double>())};
    if (kind == "silent") return SilentStrategy{};
    if (kind == "copier") return CopierStrategy{};
    if (kind == "guesser") {
        GuesserStrategy g;
        std::string shape = j.value("distribution", "uniform");
        g.dist.kind = shape == "normal" ? GuesserDistribution::Kind::Normal
                                        : GuesserDistribution::Kind::Uniform;
        g.dist.center = j.value("center", 5.0);
        g.dist.spread = j.value("spread", 1.0);
        return g;
    }
    throw std::invalid_argument("unknown assessor strategy '" + kind + "'");
}

InferenceStrategy inference_strategy_from_json(const Json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "use_model") return UseModelStrategy{j.at("model").get<ModelProfileId>()};
    if (kind == "downgrade") {
        return DowngradeStrategy{j.at("declared").get<ModelProfileId>(),
                                 j.at("actual").get<ModelProfileId>()};
    }
    if (kind == "free_ride") {
        FreeRideStrategy f;
        f.cost_micros = j.contains("cost") ? parse_micros_field(j.at("cost")) : 0;
        f.quality_floor_micros = parse_micros_field(j.at("quality_floor"));
        f.quality_stddev_micros =
            j.contains("quality_stddev") ? parse_micros_field(j.at("quality_stddev")) : 0;
        return f;
    }
    throw std::invalid_argument("unknown inference strategy '" + kind + "'");
}

}  // namespace

Scenario Scenario::from_json(const Json& j) {
    Scenario s;
    s.seed = j.at("seed").get<uint64_t>();
    s.duration_queries = j.at("duration_queries").get<uint32_t>();
    if (j.contains("score_domain")) {
        s.domain.lower_micros = parse_micros_field(j["score_domain"].at("lower"));
        s.domain.upper_micros = parse_micros_field(j["score_domain"].at("upper"));
    }
    std::vector<ModelProfile> models;
    for (const auto& mj : j.at("market").at("models")) {
        ModelProfile m;
        m.id = mj.at("id").get<ModelProfileId>();
        m.expected_quality_micros = parse_micros_field(mj.at("expected_quality"));
        m.cost_micros = parse_micros_field(mj.at("cost"));
        if (mj.contains("quality_stddev")) {
            m.quality_stddev_micros = parse_micros_field(mj.at("quality_stddev"));
        }
        models.push_back(m);
    }
    s.market = validate_market(std::move(models));

    const auto& rj = j.at("reward");
    s.reward.alpha = rj.at("alpha").get<double>();
    s.reward.beta = rj.at("beta").get<double>();
    s.reward.k = rj.at("k").get<uint32_t>();
    s.reward.m = rj.value("m", s.reward.k);
    s.rho = rj.value("rho", 0.1);
    s.bounty_micros = parse_micros_field(rj.at("bounty"));

    if (j.contains("scheduler")) {
        const auto& sj = j["scheduler"];
        s.scheduler.waiting_threshold = sj.value("waiting_threshold", 10u);
        if (sj.contains("bonus")) s.scheduler.bonus_micros = parse_micros_field(sj["bonus"]);
        if (sj.contains("gamma")) s.scheduler.gamma_micros = parse_micros_field(sj["gamma"]);
        if (sj.contains("step_cap") && !sj["step_cap"].is_null()) {
            s.scheduler.step_cap_micros = parse_micros_field(sj["step_cap"]);
        }
    }
    s.delta = j.value("delta", 1.0);

    if (j.contains("interarrival")) {
        const auto& ij = j["interarrival"];
        std::string kind = ij.value("kind", "fixed");
        s.interarrival.kind = kind == "exponential" ? Interarrival::Kind::Exponential
                                                    : Interarrival::Kind::Fixed;
        s.interarrival.mean_ms = ij.value("mean_ms", 100.0);
    }

    for (const auto& nj : j.at("nodes").at("inference")) {
        InferenceNodeSpec spec;
        spec.count = nj.value("count", 1u);
        spec.strategy = inference_strategy_from_json(nj.at("strategy"));
        spec.latency = LatencyModel::from_json(nj.at("latency"));
        s.inference_nodes.push_back(spec);
    }
    for (const auto& nj : j.at("nodes").at("assessors")) {
        AssessorNodeSpec spec;
        spec.count = nj.value("count", 1u);
        spec.strategy = assessor_strategy_from_json(nj.at("strategy"));
        spec.latency = LatencyModel::from_json(nj.at("latency"));
        s.assessor_nodes.push_back(spec);
    }

    s.network_hop_ms = j.value("network_hop_ms", 5.0);
    s.commit_deadline_factor = j.value("commit_deadline_factor", 10.0);
    s.reveal_deadline_factor = j.value("reveal_deadline_factor", 5.0);
    if (j.contains("seal_scheme")) {
        s.seal_scheme = seal_scheme_from_string(j["seal_scheme"].get<std::string>());
    }
    s.max_attempts = j.value("max_attempts", 3u);
    s.validate();
    return s;
}

Scenario Scenario::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file " + path);
    Json j;
    in >> j;
    return from_json(j);
}

// ---------------------------------------------------------------------------
// Event loop

namespace {

enum class EventType : uint8_t {
    QueryArrival,
    ResponseReady,
    CommitArrive,
    RevealArrive,
    CommitDeadline,
    RevealDeadline,
};

struct Event {
    int64_t time_us = 0;
    uint64_t seq = 0;  // ties broken by scheduling order
    EventType type = EventType::QueryArrival;
    uint64_t query_id = 0;
    uint32_t attempt = 1;
    uint64_t round_id = 0;
    NodeId node;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time_us != b.time_us) return a.time_us > b.time_us;
        return a.seq > b.seq;
    }
};

struct SimNode {
    NodeId id;
    LatencyModel latency;
    InferenceStrategy inference_strategy;
    AssessorStrategy assessor_strategy;
    DetStream latency_stream;
    DetStream nonce_stream;
};

constexpr uint64_t kFreeRideProfileKey = 0xf5ee51de00000000ull;

struct RoundContext {
    ConsensusRound round;
    int64_t arrival_us = 0;
    uint32_t attempt = 1;
    uint64_t effective_profile = 0;  // key the assessors score against
    double effective_quality = 0.0;
    double effective_sigma = 0.0;
    std::unordered_map<uint64_t, SealResult> pending_seals;  // node id -> seal
    std::vector<NodeId> copiers;
    bool copiers_triggered = false;
    bool done = false;
};

struct Engine {
    Engine(const Scenario& scenario, LedgerWriter* ledger, MetricsReport& report)
        : scenario(scenario), ledger(ledger), report(report) {}

    const Scenario& scenario;
    LedgerWriter* ledger;
    MetricsReport& report;

    std::priority_queue<Event, std::vector<Event>, EventLater> queue;
    uint64_t event_seq = 0;
    uint64_t next_round_id = 1;
    std::unordered_map<uint64_t, RoundContext> rounds;
    std::unordered_map<uint64_t, SimNode> nodes;  // by node id
    Scheduler* scheduler = nullptr;
    double total_assessor_compute_ms = 0.0;
    uint64_t assessor_compute_draws = 0;
    int64_t mean_assessor_latency_us = 0;
    int64_t hop_us = 0;

    void push(Event e) {
        e.seq = event_seq++;
        queue.push(e);
    }
};

void post_query(Engine& eng, uint64_t query_id, uint32_t attempt, int64_t time_us) {
    Event e;
    e.time_us = time_us;
    e.type = EventType::QueryArrival;
    e.query_id = query_id;
    e.attempt = attempt;
    eng.push(e);
}

void handle_query_arrival(Engine& eng, const Event& ev) {
    Json body;
    body["query_id"] = ev.query_id;
    body["attempt"] = ev.attempt;
    body["bounty_micros"] = eng.scenario.bounty_micros;
    eng.ledger->append(RecordKind::QueryPosted, body, ev.time_us);

    Assignment assignment = eng.scheduler->on_query_arrival(eng.scenario.reward.m);

    uint64_t round_id = eng.next_round_id++;
    RoundContext& ctx = eng.rounds[round_id];
    ctx.round.round_id = round_id;
    ctx.round.query_id = ev.query_id;
    ctx.round.inference_node = assignment.inference;
    ctx.round.assigned_assessors = assignment.assessors;
    ctx.round.k = eng.scenario.reward.k;
    ctx.arrival_us = ev.time_us;
    ctx.attempt = ev.attempt;

    SimNode& inf = eng.nodes.at(assignment.inference.id);
    auto& node_metrics = eng.report.nodes[assignment.inference.id];
    node_metrics.node = assignment.inference;
    node_metrics.assignments += 1;
    for (const NodeId& a : assignment.assessors) {
        auto& am = eng.report.nodes[a.id];
        am.node = a;
        am.assignments += 1;
    }

    // Resolve the strategy: what the response costs and what quality
    // profile the assessors will see.
    int64_t cost = 0;
    if (auto* use = std::get_if<UseModelStrategy>(&inf.inference_strategy)) {
        const ModelProfile& p = eng.scenario.market.profile(use->model);
        cost = p.cost_micros;
        ctx.effective_profile = p.id;
        ctx.effective_quality = micros_to_double(p.expected_quality_micros);
        ctx.effective_sigma = micros_to_double(p.quality_stddev_micros);
    } else if (auto* down = std::get_if<DowngradeStrategy>(&inf.inference_strategy)) {
        const ModelProfile& p = eng.scenario.market.profile(down->actual);
        cost = p.cost_micros;
        ctx.effective_profile = p.id;
        ctx.effective_quality = micros_to_double(p.expected_quality_micros);
        ctx.effective_sigma = micros_to_double(p.quality_stddev_micros);
    } else {
        const auto& f = std::get<FreeRideStrategy>(inf.inference_strategy);
        cost = f.cost_micros;
        ctx.effective_profile = kFreeRideProfileKey;
        ctx.effective_quality = micros_to_double(f.quality_floor_micros);
        ctx.effective_sigma = micros_to_double(f.quality_stddev_micros);
    }
    node_metrics.cost_micros += cost;

    Event resp;
    resp.time_us = ev.time_us + eng.hop_us + inf.latency.draw_us(inf.latency_stream);
    resp.type = EventType::ResponseReady;
    resp.round_id = round_id;
    resp.query_id = ev.query_id;
    resp.attempt = ev.attempt;
    eng.push(resp);
}

void schedule_commit(Engine& eng, RoundContext& ctx, const NodeId& assessor,
                     QualityScore score, int64_t commit_time) {
    SimNode& node = eng.nodes.at(assessor.id);
    SealResult sealed = seal(score, ctx.round.round_id, assessor,
                             node.nonce_stream.next_bytes32(), eng.scenario.seal_scheme);
    ctx.pending_seals[assessor.id] = sealed;
    Event e;
    e.time_us = commit_time;
    e.type = EventType::CommitArrive;
    e.round_id = ctx.round.round_id;
    e.node = assessor;
    eng.push(e);
}

void handle_response_ready(Engine& eng, const Event& ev) {
    RoundContext& ctx = eng.rounds.at(ev.round_id);
    ConsensusRound& round = ctx.round;

    Json resp_body;
    resp_body["round_id"] = round.round_id;
    resp_body["query_id"] = round.query_id;
    resp_body["responder"] = consensus::node_to_json(round.inference_node);
    resp_body["model"] = ctx.effective_profile;
    eng.ledger->append(RecordKind::ResponsePosted, resp_body, ev.time_us);

    round.deadline_commit_us =
        ev.time_us + static_cast<int64_t>(eng.scenario.commit_deadline_factor *
                                          static_cast<double>(eng.mean_assessor_latency_us));
    round.deadline_reveal_us =
        round.deadline_commit_us +
        static_cast<int64_t>(eng.scenario.reveal_deadline_factor *
                             static_cast<double>(eng.mean_assessor_latency_us));
    round.phase = RoundPhase::Commit;

    Json assign_body;
    assign_body["round_id"] = round.round_id;
    assign_body["query_id"] = round.query_id;
    assign_body["inference"] = consensus::node_to_json(round.inference_node);
    assign_body["k"] = round.k;
    assign_body["m"] = eng.scenario.reward.m;
    assign_body["assessors"] = Json::array();
    for (const NodeId& a : round.assigned_assessors) {
        assign_body["assessors"].push_back(consensus::node_to_json(a));
    }
    assign_body["deadline_commit_us"] = round.deadline_commit_us;
    assign_body["deadline_reveal_us"] = round.deadline_reveal_us;
    eng.ledger->append(RecordKind::AssessorsAssigned, assign_body, ev.time_us);

    for (const NodeId& assessor : round.assigned_assessors) {
        SimNode& node = eng.nodes.at(assessor.id);
        const AssessorStrategy& strategy = node.assessor_strategy;

        if (std::holds_alternative<SilentStrategy>(strategy)) continue;
        if (std::holds_alternative<CopierStrategy>(strategy)) {
            ctx.copiers.push_back(assessor);
            continue;
        }

        int64_t compute_us = node.latency.draw_us(node.latency_stream);
        eng.total_assessor_compute_ms += static_cast<double>(compute_us) / 1000.0;
        eng.assessor_compute_draws += 1;

        QualityScore score;
        int64_t extra = 0;
        if (std::holds_alternative<HonestStrategy>(strategy)) {
            score = synthetic_draw(eng.scenario.seed, round.query_id,
                                   ctx.effective_profile, ctx.effective_quality,
                                   ctx.effective_sigma, eng.scenario.domain);
        } else if (auto* g = std::get_if<GuesserStrategy>(&strategy)) {
            score = guesser_score(eng.scenario.seed ^ (assessor.id * 0x9e3779b97f4a7c15ull),
                                  round.query_id, g->dist, eng.scenario.domain);
        } else if (auto* c = std::get_if<ConstantStrategy>(&strategy)) {
            score = QualityScore{c->value_micros};
        } else {
            auto& late = std::get<LateStrategy>(strategy);
            extra = late.extra_delay_us;
            score = synthetic_draw(eng.scenario.seed, round.query_id,
                                   ctx.effective_profile, ctx.effective_quality,
                                   ctx.effective_sigma, eng.scenario.domain);
        }
        schedule_commit(eng, ctx, assessor, score,
                        ev.time_us + eng.hop_us + compute_us + extra + eng.hop_us);
    }

    Event deadline;
    deadline.time_us = round.deadline_commit_us + 1;
    deadline.type = EventType::CommitDeadline;
    deadline.round_id = round.round_id;
    eng.push(deadline);
}

void abort_round(Engine& eng, RoundContext& ctx, int64_t now_us) {
    ConsensusRound& round = ctx.round;
    Json body;
    body["round_id"] = round.round_id;
    body["query_id"] = round.query_id;
    body["reason"] = round.abort_reason;
    eng.ledger->append(RecordKind::RoundAborted, body, now_us);

    eng.report.aborts += 1;
    RoundMetrics metrics;
    metrics.round_id = round.round_id;
    metrics.query_id = round.query_id;
    metrics.attempt = ctx.attempt;
    metrics.arrival_us = ctx.arrival_us;
    metrics.aborted = true;
    metrics.inference_node = round.inference_node.id;
    eng.report.rounds.push_back(metrics);

    eng.scheduler->on_task_outcome(round.inference_node, false);
    for (const NodeId& a : round.assigned_assessors) {
        eng.scheduler->on_task_outcome(a, false);
    }
    ctx.done = true;

    if (ctx.attempt < eng.scenario.max_attempts) {
        post_query(eng, round.query_id, ctx.attempt + 1, now_us + 1);
    } else {
        eng.report.failed_queries += 1;
    }
}

void finalize_round(Engine& eng, RoundContext& ctx, int64_t now_us) {
    ConsensusRound& round = ctx.round;
    Json fin_body;
    fin_body["round_id"] = round.round_id;
    fin_body["consensus_micros"] = round.consensus_micros.value();
    eng.ledger->append(RecordKind::RoundFinalized, fin_body, now_us);

    auto postings = consensus::finalize_rewards(round, eng.scenario.reward,
                                                eng.scenario.rho,
                                                eng.scenario.bounty_micros,
                                                eng.scenario.domain);

    Json pay_body;
    pay_body["round_id"] = round.round_id;
    pay_body["inference"] = consensus::node_to_json(round.inference_node);
    pay_body["inference_payout_micros"] = postings.inference_payout_micros;
    pay_body["assessor_payouts"] = Json::array();
    for (const auto& p : postings.assessor_payouts) {
        Json pj;
        pj["node"] = consensus::node_to_json(p.node);
        pj["amount_micros"] = p.amount_micros;
        pay_body["assessor_payouts"].push_back(pj);
    }
    pay_body["returned_remainder_micros"] = postings.returned_remainder_micros;
    pay_body["assessor_budget_micros"] = postings.assessor_budget_micros;
    eng.ledger->append(RecordKind::RewardsDistributed, pay_body, now_us);

    eng.report.finalized += 1;
    eng.report.total_bounty_micros += eng.scenario.bounty_micros;
    eng.report.total_paid_micros += postings.inference_payout_micros +
                                    postings.returned_remainder_micros;
    eng.report.nodes[round.inference_node.id].reward_micros +=
        postings.inference_payout_micros;
    for (const auto& p : postings.assessor_payouts) {
        eng.report.nodes[p.node.id].reward_micros += p.amount_micros;
    }

    RoundMetrics metrics;
    metrics.round_id = round.round_id;
    metrics.query_id = round.query_id;
    metrics.attempt = ctx.attempt;
    metrics.arrival_us = ctx.arrival_us;
    metrics.finalized_us = now_us;
    metrics.consensus_micros = round.consensus_micros.value();
    metrics.inference_node = round.inference_node.id;
    metrics.chi = postings.chi;
    metrics.inference_payout_micros = postings.inference_payout_micros;
    eng.report.rounds.push_back(metrics);

    // Scheduler feedback: the inference node performed well when the
    // consensus cleared gamma; an assessor did when it was included with at
    // least a uniform share.
    eng.scheduler->on_task_outcome(
        round.inference_node,
        round.consensus_micros.value() >= eng.scenario.scheduler.gamma_micros);
    double uniform = 1.0 / static_cast<double>(round.k);
    for (const NodeId& a : round.assigned_assessors) {
        bool well = false;
        for (size_t i = 0; i < round.included_set.size(); ++i) {
            if (round.included_set[i] == a) {
                well = postings.shares.shares[i] >= uniform - 1e-12;
                break;
            }
        }
        eng.scheduler->on_task_outcome(a, well);
    }
    ctx.done = true;
}

void schedule_reveals(Engine& eng, RoundContext& ctx, int64_t now_us) {
    // The k-th timely commit marks the quorum; included assessors publish
    // their openings after one more network hop plus a fixed local step.
    for (const NodeId& node : ctx.round.included_set) {
        Event e;
        e.time_us = now_us + eng.hop_us + 1000;
        e.type = EventType::RevealArrive;
        e.round_id = ctx.round.round_id;
        e.node = node;
        eng.push(e);
    }
    Event deadline;
    deadline.time_us = ctx.round.deadline_reveal_us + 1;
    deadline.type = EventType::RevealDeadline;
    deadline.round_id = ctx.round.round_id;
    eng.push(deadline);
}

void handle_commit_arrive(Engine& eng, const Event& ev) {
    // Commits landing after finalization are still recorded (as excluded),
    // so stragglers such as copiers leave an auditable trace.
    RoundContext& ctx = eng.rounds.at(ev.round_id);
    const SealResult& sealed = ctx.pending_seals.at(ev.node.id);

    auto outcome = consensus::on_commit(ctx.round, sealed.sealed, ev.time_us);

    Json body;
    body["round_id"] = ev.round_id;
    body["assessor"] = consensus::node_to_json(ev.node);
    body["scheme"] = to_string(sealed.sealed.scheme);
    body["commitment"] = to_hex(sealed.sealed.commitment);
    body["excluded"] = outcome.excluded;
    eng.ledger->append(RecordKind::ScoreSealed, body, ev.time_us);

    if (outcome.quorum_reached) {
        schedule_reveals(eng, ctx, ev.time_us);
    }
}

void handle_reveal_arrive(Engine& eng, const Event& ev) {
    RoundContext& ctx = eng.rounds.at(ev.round_id);
    if (ctx.done) return;
    const SealResult& sealed = ctx.pending_seals.at(ev.node.id);

    auto outcome = consensus::on_reveal(ctx.round, sealed.reveal, ev.time_us);

    Json body;
    body["round_id"] = ev.round_id;
    body["assessor"] = consensus::node_to_json(ev.node);
    body["score_micros"] = sealed.reveal.score.micros;
    body["opening"] = to_hex(sealed.reveal.opening);
    body["valid"] = outcome.valid;
    eng.ledger->append(RecordKind::ScoreRevealed, body, ev.time_us);

    // Copiers commit only once a reveal is visible.
    if (!ctx.copiers_triggered) {
        ctx.copiers_triggered = true;
        for (const NodeId& copier : ctx.copiers) {
            schedule_commit(eng, ctx, copier, sealed.reveal.score,
                            ev.time_us + eng.hop_us);
        }
    }

    if (outcome.finalized) {
        finalize_round(eng, ctx, ev.time_us);
    } else if (outcome.aborted) {
        abort_round(eng, ctx, ev.time_us);
    }
}

void handle_deadline(Engine& eng, const Event& ev) {
    RoundContext& ctx = eng.rounds.at(ev.round_id);
    if (ctx.done) return;
    if (consensus::on_timeout(ctx.round, ev.time_us)) {
        abort_round(eng, ctx, ev.time_us);
    }
}

}  // namespace

MetricsReport run(const Scenario& scenario, const std::string& out_dir) {
    scenario.validate();

    std::string ledger_path;
    std::unique_ptr<LedgerWriter> ledger;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        ledger_path = out_dir + "/ledger.jsonl";
    } else {
        ledger_path = std::filesystem::temp_directory_path() /
                      ("pqml-ledger-" + std::to_string(scenario.seed) + "-" +
                       std::to_string(::getpid()) + ".jsonl");
    }
    ledger = std::make_unique<LedgerWriter>(ledger_path);

    MetricsReport report;
    Engine eng{scenario, ledger.get(), report};
    eng.hop_us = ms_to_us(scenario.network_hop_ms);

    // Build node populations; ids are assigned in declaration order.
    uint64_t next_id = 1;
    std::vector<NodeState> inference_pool;
    std::vector<NodeState> assessor_pool;
    uint32_t join = 0;
    for (const auto& spec : scenario.inference_nodes) {
        for (uint32_t i = 0; i < spec.count; ++i) {
            NodeId id{next_id++, NodeRole::Inference};
            SimNode node{id, spec.latency, spec.strategy, HonestStrategy{},
                         DetStream(scenario.seed, "latency", id.id),
                         DetStream(scenario.seed, "nonce", id.id)};
            eng.nodes.emplace(id.id, std::move(node));
            NodeState st;
            st.node = id;
            st.join_order = join++;
            inference_pool.push_back(st);
        }
    }
    double assessor_latency_sum = 0.0;
    uint32_t assessor_count = 0;
    for (const auto& spec : scenario.assessor_nodes) {
        for (uint32_t i = 0; i < spec.count; ++i) {
            NodeId id{next_id++, NodeRole::Assessor};
            SimNode node{id, spec.latency, UseModelStrategy{}, spec.strategy,
                         DetStream(scenario.seed, "latency", id.id),
                         DetStream(scenario.seed, "nonce", id.id)};
            eng.nodes.emplace(id.id, std::move(node));
            NodeState st;
            st.node = id;
            st.join_order = join++;
            assessor_pool.push_back(st);
            assessor_latency_sum += spec.latency.mean_ms();
            ++assessor_count;
        }
    }
    eng.mean_assessor_latency_us =
        ms_to_us(assessor_latency_sum / std::max(assessor_count, 1u));

    Scheduler scheduler(std::move(inference_pool), std::move(assessor_pool),
                        scenario.scheduler);
    eng.scheduler = &scheduler;

    // Seed the arrival process.
    DetStream arrivals(scenario.seed, "arrival");
    int64_t t = 0;
    for (uint32_t q = 0; q < scenario.duration_queries; ++q) {
        double gap_ms = scenario.interarrival.mean_ms;
        if (scenario.interarrival.kind == Interarrival::Kind::Exponential) {
            gap_ms = -scenario.interarrival.mean_ms * std::log(arrivals.next_unit());
        }
        t += ms_to_us(gap_ms);
        post_query(eng, q + 1, 1, t);
    }

    while (!eng.queue.empty()) {
        Event ev = eng.queue.top();
        eng.queue.pop();
        switch (ev.type) {
            case EventType::QueryArrival:
                handle_query_arrival(eng, ev);
                break;
            case EventType::ResponseReady:
                handle_response_ready(eng, ev);
                break;
            case EventType::CommitArrive:
                handle_commit_arrive(eng, ev);
                break;
            case EventType::RevealArrive:
                handle_reveal_arrive(eng, ev);
                break;
            case EventType::CommitDeadline:
            case EventType::RevealDeadline:
                handle_deadline(eng, ev);
                break;
        }
    }
    ledger->flush();

    // Aggregate latency statistics over finalized rounds.
    std::vector<double> latencies;
    std::vector<double> scores;
    for (const auto& r : report.rounds) {
        if (r.aborted) continue;
        latencies.push_back(r.latency_ms());
        scores.push_back(micros_to_double(r.consensus_micros));
    }
    if (!latencies.empty()) {
        std::sort(latencies.begin(), latencies.end());
        double sum = 0.0;
        for (double l : latencies) sum += l;
        report.mean_latency_ms = sum / static_cast<double>(latencies.size());
        report.median_latency_ms = latencies[latencies.size() / 2];
        report.p95_latency_ms =
            latencies[std::min(latencies.size() - 1,
                               static_cast<size_t>(0.95 * latencies.size()))];
    }
    if (eng.assessor_compute_draws > 0) {
        report.assessor_compute_mean_ms =
            eng.total_assessor_compute_ms / static_cast<double>(eng.assessor_compute_draws);
    }
    if (scores.size() >= 2) {
        report.consensus_score_variance = empirical_variance(scores);
    }

    if (!out_dir.empty()) {
        std::ofstream csv(out_dir + "/metrics.csv");
        csv << report.to_csv();
        std::ofstream summary(out_dir + "/summary.json");
        summary << report.summary_json().dump(2) << '\n';
    } else {
        std::filesystem::remove(ledger_path);
    }
    return report;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "round_id,query_id,attempt,arrival_us,finalized_us,latency_ms,aborted,"
          "consensus_score,inference_node,chi,inference_payout\n";
    for (const auto& r : rounds) {
        os << r.round_id << ',' << r.query_id << ',' << r.attempt << ','
           << r.arrival_us << ',' << r.finalized_us << ','
           << (r.aborted ? 0.0 : r.latency_ms()) << ',' << (r.aborted ? 1 : 0) << ','
           << format_micros(r.consensus_micros) << ',' << r.inference_node << ','
           << r.chi << ',' << format_micros(r.inference_payout_micros) << '\n';
    }
    return os.str();
}

Json MetricsReport::summary_json() const {
    Json j;
    j["finalized_rounds"] = finalized;
    j["aborted_rounds"] = aborts;
    j["failed_queries"] = failed_queries;
    j["mean_latency_ms"] = mean_latency_ms;
    j["median_latency_ms"] = median_latency_ms;
    j["p95_latency_ms"] = p95_latency_ms;
    j["assessor_compute_mean_ms"] = assessor_compute_mean_ms;
    j["consensus_score_variance"] = consensus_score_variance;
    j["total_bounty_micros"] = total_bounty_micros;
    j["total_paid_micros"] = total_paid_micros;
    j["nodes"] = Json::array();
    for (const auto& [id, n] : nodes) {
        Json nj;
        nj["node"] = consensus::node_to_json(n.node);
        nj["reward_micros"] = n.reward_micros;
        nj["cost_micros"] = n.cost_micros;
        nj["profit_micros"] = n.profit_micros();
        nj["assignments"] = n.assignments;
        j["nodes"].push_back(nj);
    }
    return j;
}

std::vector<KSweepRow> sweep_k(const Scenario& base, const std::vector<uint32_t>& ks) {
    uint32_t assessors = 0;
    for (const auto& spec : base.assessor_nodes) assessors += spec.count;
    std::vector<KSweepRow> rows;
    for (uint32_t k : ks) {
        Scenario s = base;
        s.reward.k = k;
        s.reward.m = std::max(base.reward.m, k);
        if (s.reward.m > assessors) {
            throw std::invalid_argument("sweep_k: k exceeds the assessor population");
        }
        // Derive a per-k seed so runs stay independent but reproducible.
        ByteWriter w;
        w.put_u64(base.seed);
        w.put_str("sweep-k");
        w.put_u64(k);
        Hash256 h = sha256(w.bytes());
        uint64_t derived = 0;
        for (int i = 0; i < 8; ++i) derived = (derived << 8) | h[static_cast<size_t>(i)];
        s.seed = derived;

        MetricsReport report = run(s);
        rows.push_back({k, report.mean_latency_ms, report.median_latency_ms,
                        report.p95_latency_ms, report.assessor_compute_mean_ms});
    }
    return rows;
}

std::string k_sweep_csv(const std::vector<KSweepRow>& rows) {
    std::ostringstream os;
    os << "k,mean_ms,median_ms,p95_ms,assessor_mean_ms\n";
    for (const auto& r : rows) {
        os << r.k << ',' << r.mean_ms << ',' << r.median_ms << ',' << r.p95_ms << ','
           << r.assessor_mean_ms << '\n';
    }
    return os.str();
}

namespace {

StrategyProfit profit_of_run(const std::string& name, const Scenario& s,
                             uint64_t inference_node_id) {
    MetricsReport report = run(s);
    StrategyProfit out;
    out.name = name;
    const NodeMetrics& n = report.nodes.at(inference_node_id);
    out.total_profit_micros = n.profit_micros();

    std::vector<double> per_query;
    double chi_sum = 0.0;
    int64_t per_query_cost =
        n.assignments > 0
            ? div_half_even(n.cost_micros, static_cast<int64_t>(n.assignments))
            : 0;
    for (const auto& r : report.rounds) {
        if (r.aborted) continue;
        per_query.push_back(micros_to_double(r.inference_payout_micros - per_query_cost));
        chi_sum += r.chi;
    }
    if (!per_query.empty()) {
        out.mean_profit_per_query = micros_to_double(out.total_profit_micros) /
                                    static_cast<double>(per_query.size());
        out.mean_chi = chi_sum / static_cast<double>(per_query.size());
        if (per_query.size() >= 2) {
            out.profit_std_error = std::sqrt(empirical_variance(per_query) /
                                             static_cast<double>(per_query.size()));
        }
    }
    return out;
}

}  // namespace

Theorem1Result theorem1_experiment(const Scenario& base,
                                   const FreeRideStrategy& free_ride) {
    Theorem1Result result;

    auto make_scenario = [&](const InferenceStrategy& strategy) {
        Scenario s = base;
        s.inference_nodes.clear();
        InferenceNodeSpec spec;
        spec.count = 1;
        spec.strategy = strategy;
        spec.latency = base.inference_nodes.empty() ? LatencyModel{}
                                                    : base.inference_nodes[0].latency;
        s.inference_nodes.push_back(spec);
        return s;
    };

    for (const auto& model : base.market.models) {
        Scenario s = make_scenario(UseModelStrategy{model.id});
        result.strategies.push_back(
            profit_of_run("use_model_" + std::to_string(model.id), s, 1));
    }
    {
        Scenario s = make_scenario(free_ride);
        result.strategies.push_back(profit_of_run("free_ride", s, 1));
    }

    for (size_t i = 0; i < result.strategies.size(); ++i) {
        if (result.strategies[i].total_profit_micros >
            result.strategies[result.best_index].total_profit_micros) {
            result.best_index = i;
        }
    }
    // Market models are sorted non-ascending by cost, so index 0 is the
    // costliest (and under no-domination the highest-quality) model.
    result.costliest_model_wins = result.best_index == 0;
    return result;
}

Theorem2Result theorem2_experiment(uint64_t seed, double beta, double delta,
                                   double epsilon, uint32_t k, uint64_t rounds,
                                   const ScoreDomain& domain) {
    if (k < 2) throw std::invalid_argument("theorem2_experiment: k must be >= 2");
    if (rounds < 2) throw std::invalid_argument("theorem2_experiment: need >= 2 rounds");

    GuesserDistribution dist;
    dist.kind = GuesserDistribution::Kind::Uniform;
    dist.spread = std::sqrt(3.0 * delta);  // uniform half-width for variance = delta

    double mid = micros_to_double(domain.lower_micros + domain.width_micros() / 2);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (uint64_t r = 0; r < rounds; ++r) {
        // Honest assessors agree exactly; their common score is the center
        // the guesser aims at.
        QualityScore honest{micros_from_double(mid)};
        dist.center = mid;
        QualityScore guess = guesser_score(seed, r + 1, dist, domain);

        std::vector<QualityScore> scores(k - 1, honest);
        scores.push_back(guess);
        ShareVector shares = assessor_shares(scores, beta);
        double h = shares.shares.back();
        sum += h;
        sum_sq += h * h;
    }
    Theorem2Result out;
    out.beta = beta;
    out.epsilon = epsilon;
    out.rounds = rounds;
    out.mean_guesser_share = sum / static_cast<double>(rounds);
    double var = (sum_sq - sum * sum / static_cast<double>(rounds)) /
                 static_cast<double>(rounds - 1);
    out.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(rounds));
    out.jensen_bound = guesser_expected_share(std::max(beta, 0.0), delta, k);
    out.within_bound = out.mean_guesser_share <= epsilon + 3.0 * out.std_error;
    return out;
}

}  // namespace pqml
