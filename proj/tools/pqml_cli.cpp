#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pqml/consensus.hpp"
#include "pqml/rewards.hpp"
#include "pqml/sim.hpp"

namespace {

using pqml::Json;

std::vector<pqml::QualityScore> parse_score_list(const std::string& csv) {
    std::vector<pqml::QualityScore> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(pqml::QualityScore{pqml::parse_micros(item)});
    }
    if (out.empty()) throw std::invalid_argument("empty score list");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<uint32_t> parse_u32_list(const std::string& csv) {
    std::vector<uint32_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<uint32_t>(std::stoul(item)));
    }
    return out;
}

pqml::MarketConfig load_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open market file " + path);
    Json j;
    in >> j;
    std::vector<pqml::ModelProfile> models;
    for (const auto& mj : j.at("models")) {
        pqml::ModelProfile m;
        m.id = mj.at("id").get<uint64_t>();
        auto parse = [](const Json& v) {
            return v.is_string() ? pqml::parse_micros(v.get<std::string>())
                                 : pqml::micros_from_double(v.get<double>());
        };
        m.expected_quality_micros = parse(mj.at("expected_quality"));
        m.cost_micros = parse(mj.at("cost"));
        if (mj.contains("quality_stddev")) {
            m.quality_stddev_micros = parse(mj.at("quality_stddev"));
        }
        models.push_back(m);
    }
    return pqml::validate_market(std::move(models));
}

// All numbers printed by the CLI are formatted exactly once, here, so
// golden tests can compare against library results.
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proof-of-Quality consensus engine and simulator"};
    app.require_subcommand(1);
    bool as_json = false;
    app.add_flag("--json", as_json, "emit machine-readable JSON");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "run one deterministic simulation");
    std::string config_path, out_dir = "out";
    uint64_t seed_override = 0;
    bool seed_set = false;
    sim_cmd->add_option("--config", config_path, "scenario JSON file")->required();
    sim_cmd->add_option("--seed", seed_override, "override the scenario seed")
        ->each([&](const std::string&) { seed_set = true; });
    sim_cmd->add_option("--out", out_dir, "output directory");

    // sweep-k
    auto* sweep_cmd = app.add_subcommand("sweep-k", "latency sweep over k");
    std::string sweep_config, sweep_out = "out", k_list = "1,5,10,20,30";
    sweep_cmd->add_option("--config", sweep_config, "scenario JSON file")->required();
    sweep_cmd->add_option("--k", k_list, "comma-separated k values");
    sweep_cmd->add_option("--out", sweep_out, "output directory");

    // thresholds alpha|beta
    auto* thr_cmd = app.add_subcommand("thresholds", "compute protocol thresholds");
    thr_cmd->require_subcommand(1);
    auto* thr_alpha = thr_cmd->add_subcommand("alpha", "inference reward threshold");
    std::string market_path;
    thr_alpha->add_option("--market", market_path, "market JSON file")->required();
    auto* thr_beta = thr_cmd->add_subcommand("beta", "assessment concentration bound");
    double delta = 1.0, epsilon = 0.1;
    uint32_t k_param = 2;
    thr_beta->add_option("--delta", delta, "score diversity lower bound")->required();
    thr_beta->add_option("--epsilon", epsilon, "target guesser share")->required();
    thr_beta->add_option("--k", k_param, "consensus score count")->required();

    // reward chi|phi
    auto* reward_cmd = app.add_subcommand("reward", "evaluate reward functions");
    reward_cmd->require_subcommand(1);
    auto* reward_chi = reward_cmd->add_subcommand("chi", "inference reward");
    std::string chi_scores;
    double chi_alpha = 1.0;
    std::string chi_upper = "10", chi_lower = "0";
    reward_chi->add_option("--scores", chi_scores, "comma-separated scores")->required();
    reward_chi->add_option("--alpha", chi_alpha, "decay factor")->required();
    reward_chi->add_option("--upper", chi_upper, "score domain upper bound");
    reward_chi->add_option("--lower", chi_lower, "score domain lower bound");
    auto* reward_phi = reward_cmd->add_subcommand("phi", "assessment shares");
    std::string phi_scores;
    double phi_beta = 1.0;
    reward_phi->add_option("--scores", phi_scores, "comma-separated scores")->required();
    reward_phi->add_option("--beta", phi_beta, "concentration factor")->required();

    // analyze-rewards
    auto* analyze_cmd = app.add_subcommand("analyze-rewards", "reward histograms");
    std::string scores_path, alphas_list = "0.5,1,2", analyze_out = "rewards.csv";
    uint32_t bins = 20;
    analyze_cmd->add_option("--scores", scores_path, "file of scores, one per line")
        ->required();
    analyze_cmd->add_option("--alphas", alphas_list, "comma-separated alpha values");
    analyze_cmd->add_option("--bins", bins, "histogram buckets");
    analyze_cmd->add_option("--out", analyze_out, "output CSV path");

    // verify-ledger / audit
    auto* verify_cmd = app.add_subcommand("verify-ledger", "check the hash chain");
    std::string verify_path;
    verify_cmd->add_option("--path", verify_path, "ledger.jsonl path")->required();

    auto* audit_cmd = app.add_subcommand("audit", "replay a ledger and check it");
    std::string audit_path, audit_config;
    audit_cmd->add_option("--path", audit_path, "ledger.jsonl path")->required();
    audit_cmd->add_option("--config", audit_config, "scenario JSON file")->required();

    // theorem experiments
    auto* t1_cmd = app.add_subcommand("theorem1", "per-strategy profit experiment");
    std::string t1_config;
    t1_cmd->add_option("--config", t1_config, "scenario JSON file")->required();
    double t1_floor = 2.0;
    t1_cmd->add_option("--free-ride-floor", t1_floor, "free rider quality floor");

    auto* t2_cmd = app.add_subcommand("theorem2", "guesser share experiment");
    std::string t2_config;
    t2_cmd->add_option("--config", t2_config, "scenario JSON file")->required();
    uint64_t t2_rounds = 100000;
    double t2_epsilon = 0.1;
    t2_cmd->add_option("--rounds", t2_rounds, "Monte-Carlo rounds");
    t2_cmd->add_option("--epsilon", t2_epsilon, "target guesser share");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // usage errors exit 2
    }

    try {
        if (*sim_cmd) {
            pqml::Scenario scenario = pqml::Scenario::from_file(config_path);
            if (seed_set) scenario.seed = seed_override;
            pqml::MetricsReport report = pqml::run(scenario, out_dir);
            if (as_json) {
                std::cout << report.summary_json().dump(2) << '\n';
            } else {
                std::cout << "finalized " << report.finalized << " rounds, "
                          << report.aborts << " aborts, mean latency "
                          << fmt(report.mean_latency_ms) << " ms\n"
                          << "outputs in " << out_dir << "/\n";
            }
            return 0;
        }
        if (*sweep_cmd) {
            pqml::Scenario scenario = pqml::Scenario::from_file(sweep_config);
            auto rows = pqml::sweep_k(scenario, parse_u32_list(k_list));
            std::filesystem::create_directories(sweep_out);
            std::string csv = pqml::k_sweep_csv(rows);
            std::ofstream(sweep_out + "/sweep_k.csv") << csv;
            std::cout << csv;
            return 0;
        }
        if (*thr_alpha) {
            auto market = load_market(market_path);
            auto threshold = pqml::alpha_threshold(market);
            if (as_json) {
                Json j;
                j["theta"] = threshold.theta;
                j["no_eligible_pair"] = threshold.no_eligible_pair;
                j["pairs"] = Json::array();
                for (const auto& p : threshold.pairs) {
                    Json pj;
                    pj["higher"] = p.higher;
                    pj["lower"] = p.lower;
                    pj["alpha"] = p.alpha_jl;
                    j["pairs"].push_back(pj);
                }
                std::cout << j.dump(2) << '\n';
            } else {
                std::cout << "theta " << fmt(threshold.theta) << '\n';
                for (const auto& p : threshold.pairs) {
                    std::cout << "pair " << p.higher << ">" << p.lower << " alpha "
                              << fmt(p.alpha_jl) << '\n';
                }
                if (threshold.no_eligible_pair) {
                    std::cout << "warning: no eligible pair, theta defaulted to 0\n";
                }
            }
            return 0;
        }
        if (*thr_beta) {
            double bound = pqml::beta_bound(delta, epsilon, k_param);
            if (as_json) {
                Json j;
                j["beta_bound"] = bound;
                if (bound < 0) {
                    j["warning"] = "no non-negative beta meets epsilon";
                    j["min_expected_share"] = 1.0 / static_cast<double>(k_param);
                }
                std::cout << j.dump(2) << '\n';
            } else {
                std::cout << "beta_bound " << fmt(bound) << '\n';
                if (bound < 0) {
                    std::cout << "warning: no non-negative beta meets epsilon; the "
                                 "achievable minimum E(h_i) is "
                              << fmt(1.0 / static_cast<double>(k_param))
                              << " at beta=0\n";
                }
            }
            return 0;
        }
        if (*reward_chi) {
            auto scores = parse_score_list(chi_scores);
            pqml::ScoreDomain domain{pqml::parse_micros(chi_lower),
                                     pqml::parse_micros(chi_upper)};
            pqml::RewardParams params;
            params.alpha = chi_alpha;
            params.k = static_cast<uint32_t>(scores.size());
            params.m = params.k;
            double chi = pqml::inference_reward(scores, params, domain);
            if (as_json) {
                Json j;
                j["chi"] = chi;
                std::cout << j.dump() << '\n';
            } else {
                std::cout << fmt(chi) << '\n';
            }
            return 0;
        }
        if (*reward_phi) {
            auto scores = parse_score_list(phi_scores);
            auto shares = pqml::assessor_shares(scores, phi_beta);
            if (as_json) {
                Json j;
                j["shares"] = shares.shares;
                std::cout << j.dump() << '\n';
            } else {
                for (size_t i = 0; i < shares.shares.size(); ++i) {
                    std::cout << (i ? "," : "") << fmt(shares.shares[i]);
                }
                std::cout << '\n';
            }
            return 0;
        }
        if (*analyze_cmd) {
            std::ifstream in(scores_path);
            if (!in) throw std::invalid_argument("cannot open " + scores_path);
            std::vector<pqml::QualityScore> samples;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                for (auto& s : parse_score_list(line)) samples.push_back(s);
            }
            pqml::ScoreDomain domain;
            auto hists = pqml::reward_distribution(samples, parse_double_list(alphas_list),
                                                   domain, bins);
            std::string csv = pqml::reward_distribution_csv(hists, bins);
            std::ofstream(analyze_out) << csv;
            if (as_json) {
                Json j;
                for (const auto& h : hists) {
                    Json hj;
                    hj["alpha"] = h.alpha;
                    hj["counts"] = h.counts;
                    hj["mean_reward"] = h.mean_reward;
                    j.push_back(hj);
                }
                std::cout << j.dump(2) << '\n';
            } else {
                for (const auto& h : hists) {
                    std::cout << "alpha " << h.alpha << " mean_reward "
                              << fmt(h.mean_reward) << '\n';
                }
                std::cout << "histogram written to " << analyze_out << '\n';
            }
            return 0;
        }
        if (*verify_cmd) {
            auto result = pqml::verify_chain(verify_path);
            if (result.ok) {
                std::cout << "ok\n";
                return 0;
            }
            std::cout << "first-bad-seq " << result.first_bad_seq << '\n';
            return 1;
        }
        if (*audit_cmd) {
            pqml::Scenario scenario = pqml::Scenario::from_file(audit_config);
            pqml::consensus::AuditParams params;
            params.alpha = scenario.reward.alpha;
            params.beta = scenario.reward.beta;
            params.rho = scenario.rho;
            params.domain = scenario.domain;
            auto report = pqml::consensus::audit_replay(audit_path, params);
            std::cout << report.to_json().dump(2) << '\n';
            return report.divergences.empty() ? 0 : 1;
        }
        if (*t1_cmd) {
            pqml::Scenario scenario = pqml::Scenario::from_file(t1_config);
            pqml::FreeRideStrategy free_ride;
            free_ride.quality_floor_micros = pqml::micros_from_double(t1_floor);
            auto result = pqml::theorem1_experiment(scenario, free_ride);
            if (as_json) {
                Json j;
                j["strategies"] = Json::array();
                for (const auto& s : result.strategies) {
                    Json sj;
                    sj["name"] = s.name;
                    sj["total_profit"] = pqml::micros_to_double(s.total_profit_micros);
                    sj["mean_profit_per_query"] = s.mean_profit_per_query;
                    sj["std_error"] = s.profit_std_error;
                    sj["mean_chi"] = s.mean_chi;
                    j["strategies"].push_back(sj);
                }
                j["costliest_model_wins"] = result.costliest_model_wins;
                std::cout << j.dump(2) << '\n';
            } else {
                for (const auto& s : result.strategies) {
                    std::cout << s.name << " profit "
                              << pqml::format_micros(s.total_profit_micros)
                              << " mean_chi " << fmt(s.mean_chi) << '\n';
                }
                std::cout << (result.costliest_model_wins
                                  ? "costliest model maximizes profit\n"
                                  : "warning: a cheaper strategy maximizes profit\n");
            }
            return 0;
        }
        if (*t2_cmd) {
            pqml::Scenario scenario = pqml::Scenario::from_file(t2_config);
            double beta = scenario.reward.beta;
            auto result = pqml::theorem2_experiment(scenario.seed, beta, scenario.delta,
                                                    t2_epsilon, scenario.reward.k,
                                                    t2_rounds, scenario.domain);
            if (as_json) {
                Json j;
                j["beta"] = result.beta;
                j["mean_guesser_share"] = result.mean_guesser_share;
                j["std_error"] = result.std_error;
                j["jensen_bound"] = result.jensen_bound;
                j["within_bound"] = result.within_bound;
                std::cout << j.dump(2) << '\n';
            } else {
                std::cout << "guesser share " << fmt(result.mean_guesser_share)
                          << " (SE " << fmt(result.std_error) << "), bound "
                          << fmt(result.jensen_bound) << '\n';
            }
            return result.within_bound ? 0 : 1;
        }
    } catch (const pqml::LedgerParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
