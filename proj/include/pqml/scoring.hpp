#pragma once

#include <optional>
#include <variant>

#include "pqml/domain.hpp"
#include "pqml/hash.hpp"

namespace pqml {

// Deterministic synthetic stand-in for the cross-encoder: the score of a
// (query, model) pair is a clamped normal draw around the model's expected
// quality, derived from a hash so every honest assessor computes the same
// value.
struct SyntheticScorerConfig {
    uint64_t workload_seed = 0;
    ScoreDomain domain;
    MarketConfig market;
};

QualityScore honest_score(uint64_t query_id, ModelProfileId model,
                          const SyntheticScorerConfig& config);

// Core synthetic draw: clamp(e + sigma * Phi^-1(u)) with u hashed from
// (workload seed, query, profile key). Responses outside the model market
// (free riders) score through this with their own profile key.
QualityScore synthetic_draw(uint64_t workload_seed, uint64_t query_id,
                            uint64_t profile_key, double expected, double sigma,
                            const ScoreDomain& domain);

struct GuesserDistribution {
    enum class Kind { Uniform, Normal } kind = Kind::Uniform;
    double center = 5.0;
    // Uniform: half-width of the interval; Normal: standard deviation.
    double spread = 1.0;

    double variance() const {
        return kind == Kind::Uniform ? spread * spread / 3.0 : spread * spread;
    }
};

// Independent draw per (node, query); uncorrelated with honest_score by
// construction (separate hash domain).
QualityScore guesser_score(uint64_t node_seed, uint64_t query_id,
                           const GuesserDistribution& dist,
                           const ScoreDomain& domain);

// Unbiased sample variance.
double empirical_variance(const std::vector<QualityScore>& scores);
double empirical_variance(const std::vector<double>& values);

// Assessor behavior in simulations.
struct HonestStrategy {};
struct GuesserStrategy {
    GuesserDistribution dist;
};
struct ConstantStrategy {
    int64_t value_micros = 0;
};
struct LateStrategy {
    int64_t extra_delay_us = 0;
};
struct SilentStrategy {};
// Commits only after observing a reveal; the commit-reveal ordering makes
// this node arrive after the included set is fixed.
struct CopierStrategy {};

using AssessorStrategy = std::variant<HonestStrategy, GuesserStrategy,
                                      ConstantStrategy, LateStrategy,
                                      SilentStrategy, CopierStrategy>;

struct UseModelStrategy {
    ModelProfileId model = 0;
};
struct DowngradeStrategy {
    ModelProfileId declared = 0;  // cost charged and model claimed
    ModelProfileId actual = 0;    // quality actually produced
};
struct FreeRideStrategy {
    int64_t cost_micros = 0;
    int64_t quality_floor_micros = 0;
    int64_t quality_stddev_micros = 0;
};

using InferenceStrategy =
    std::variant<UseModelStrategy, DowngradeStrategy, FreeRideStrategy>;

// External scorer adapter: newline-delimited JSON over a child process's
// standard streams or a TCP socket. Request {"id","query","response"},
// reply {"id","raw"} with raw in [-1,1]. One request in flight at a time.
struct AdapterConfig {
    enum class Mode { Process, Tcp } mode = Mode::Process;
    std::string command;       // Process mode: shell command to spawn
    std::string host;          // Tcp mode
    uint16_t port = 0;
    int timeout_ms = 5000;
    ScoreDomain domain;
};

class AdapterProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ExternalScorer {
public:
    explicit ExternalScorer(AdapterConfig config);
    ~ExternalScorer();
    ExternalScorer(const ExternalScorer&) = delete;
    ExternalScorer& operator=(const ExternalScorer&) = delete;

    // nullopt on timeout (the assessor is treated as silent for the round);
    // AdapterProtocolError on malformed or out-of-range replies.
    std::optional<QualityScore> score(uint64_t id, const std::string& query,
                                      const std::string& response);

private:
    void spawn_process();
    void connect_tcp();

    AdapterConfig config_;
    int in_fd_ = -1;   // we read replies from here
    int out_fd_ = -1;  // we write requests here
    pid_t child_ = -1;
    std::string buffer_;
};

}  // namespace pqml
