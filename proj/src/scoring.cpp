#include "pqml/scoring.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <signal.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

namespace pqml {

namespace {

int64_t clamp_to_domain(double value, const ScoreDomain& domain) {
    int64_t micros = micros_from_double(value);
    return std::clamp(micros, domain.lower_micros, domain.upper_micros);
}

double hash_unit(const std::string& label, uint64_t seed, uint64_t a, uint64_t b) {
    ByteWriter w;
    w.put_str(label);
    w.put_u64(seed);
    w.put_u64(a);
    w.put_u64(b);
    Hash256 h = sha256(w.bytes());
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h[static_cast<size_t>(i)];
    return (static_cast<double>(v) + 0.5) * 0x1p-64;
}

}  // namespace

QualityScore synthetic_draw(uint64_t workload_seed, uint64_t query_id,
                            uint64_t profile_key, double expected, double sigma,
                            const ScoreDomain& domain) {
    double u = hash_unit("score-v1", workload_seed, query_id, profile_key);
    double value = sigma == 0.0 ? expected : expected + sigma * inverse_normal_cdf(u);
    return QualityScore{clamp_to_domain(value, domain)};
}

QualityScore honest_score(uint64_t query_id, ModelProfileId model,
                          const SyntheticScorerConfig& config) {
    const ModelProfile& profile = config.market.profile(model);
    return synthetic_draw(config.workload_seed, query_id, model,
                          micros_to_double(profile.expected_quality_micros),
                          micros_to_double(profile.quality_stddev_micros),
                          config.domain);
}

QualityScore guesser_score(uint64_t node_seed, uint64_t query_id,
                           const GuesserDistribution& dist,
                           const ScoreDomain& domain) {
    double u = hash_unit("guess-v1", node_seed, query_id, 0);
    double value;
    if (dist.kind == GuesserDistribution::Kind::Uniform) {
        value = dist.center + (2.0 * u - 1.0) * dist.spread;
    } else {
        value = dist.center + dist.spread * inverse_normal_cdf(u);
    }
    return QualityScore{clamp_to_domain(value, domain)};
}

double empirical_variance(const std::vector<double>& values) {
    if (values.size() < 2) {
        throw std::invalid_argument("empirical_variance: need at least 2 samples");
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(values.size() - 1);
}

double empirical_variance(const std::vector<QualityScore>& scores) {
    std::vector<double> values;
    values.reserve(scores.size());
    for (const auto& s : scores) values.push_back(s.value());
    return empirical_variance(values);
}

ExternalScorer::ExternalScorer(AdapterConfig config) : config_(std::move(config)) {
    if (config_.mode == AdapterConfig::Mode::Process) {
        spawn_process();
    } else {
        connect_tcp();
    }
}

ExternalScorer::~ExternalScorer() {
    if (out_fd_ >= 0) close(out_fd_);
    if (in_fd_ >= 0 && in_fd_ != out_fd_) close(in_fd_);
    if (child_ > 0) {
        kill(child_, SIGTERM);
        waitpid(child_, nullptr, 0);
    }
}

void ExternalScorer::spawn_process() {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
        throw std::runtime_error("ExternalScorer: pipe failed");
    }
    child_ = fork();
    if (child_ < 0) throw std::runtime_error("ExternalScorer: fork failed");
    if (child_ == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", config_.command.c_str(), nullptr);
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    out_fd_ = to_child[1];
    in_fd_ = from_child[0];
}

void ExternalScorer::connect_tcp() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    std::string port = std::to_string(config_.port);
    if (getaddrinfo(config_.host.c_str(), port.c_str(), &hints, &result) != 0) {
        throw std::runtime_error("ExternalScorer: cannot resolve " + config_.host);
    }
    int fd = -1;
    for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
        fd = socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        close(fd);
        fd = -1;
    }
    freeaddrinfo(result);
    if (fd < 0) {
        throw std::runtime_error("ExternalScorer: cannot connect to " + config_.host +
                                 ":" + port);
    }
    in_fd_ = out_fd_ = fd;
}

std::optional<QualityScore> ExternalScorer::score(uint64_t id,
                                                  const std::string& query,
                                                  const std::string& response) {
    nlohmann::json req;
    req["id"] = id;
    req["query"] = query;
    req["response"] = response;
    std::string line = req.dump() + "\n";
    size_t written = 0;
    while (written < line.size()) {
        ssize_t n = write(out_fd_, line.data() + written, line.size() - written);
        if (n <= 0) throw AdapterProtocolError("adapter write failed");
        written += static_cast<size_t>(n);
    }

    // Read until one full reply line arrives or the timeout expires.
    while (true) {
        size_t newline = buffer_.find('\n');
        if (newline != std::string::npos) {
            std::string reply_line = buffer_.substr(0, newline);
            buffer_.erase(0, newline + 1);
            nlohmann::json reply;
            try {
                reply = nlohmann::json::parse(reply_line);
            } catch (const std::exception& e) {
                throw AdapterProtocolError(std::string("malformed adapter reply: ") +
                                           e.what());
            }
            if (!reply.contains("id") || !reply.contains("raw")) {
                throw AdapterProtocolError("adapter reply missing id or raw");
            }
            if (reply["id"].get<uint64_t>() != id) {
                throw AdapterProtocolError("adapter reply id mismatch");
            }
            double raw = reply["raw"].get<double>();
            if (!(raw >= -1.0 && raw <= 1.0)) {
                throw AdapterProtocolError("adapter raw score outside [-1,1]");
            }
            return normalize_score(raw, config_.domain);
        }

        pollfd pfd{in_fd_, POLLIN, 0};
        int rc = poll(&pfd, 1, config_.timeout_ms);
        if (rc == 0) return std::nullopt;  // timeout: scored as absent
        if (rc < 0) throw AdapterProtocolError("adapter poll failed");
        char chunk[4096];
        ssize_t n = read(in_fd_, chunk, sizeof(chunk));
        if (n <= 0) throw AdapterProtocolError("adapter closed the channel");
        buffer_.append(chunk, static_cast<size_t>(n));
    }
}

}  // namespace pqml
