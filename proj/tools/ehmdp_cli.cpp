#include "ehmdp/analysis.hpp"
#include "ehmdp/config.hpp"
#include "ehmdp/error.hpp"
#include "ehmdp/experiment.hpp"
#include "ehmdp/learners.hpp"
#include "ehmdp/lp.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace ehmdp;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInvalid = 3;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<long> horizon;
};

ExperimentSpec load(const std::string& path, const Overrides& o) {
    ExperimentSpec spec = load_spec(path);
    if (o.seed) {
        spec.seed = *o.seed;
    }
    if (o.runs) {
        spec.runs = *o.runs;
    }
    if (o.horizon) {
        spec.horizon = *o.horizon;
    }
    return spec;
}

std::string join(std::span<const Action> xs) {
    std::ostringstream os;
    os << "{";
    for (std::size_t k = 0; k < xs.size(); ++k) {
        os << (k ? "," : "") << xs[k];
    }
    os << "}";
    return os.str();
}

int cmd_solve(const std::string& config, const std::string& lp_dump) {
    const ExperimentSpec spec = load_spec(config);
    const Environment env(spec.env);
    const auto& model = env.model();
    const GenieSolution genie = solve_genie(env);
    std::cout << std::setprecision(12);
    std::cout << (env.sense() == Sense::Maximize ? "objective: maximize average reward\n"
                                                 : "objective: minimize average cost\n");
    std::cout << "state\tallowed\tbeta*\tchannel\tmean\n";
    for (int s = 0; s < model.num_states(); ++s) {
        const Action a = genie.policy(s);
        const int i = model.pair_index(s, *model.action_position(s, a));
        std::cout << s << "\t" << join(model.actions(s)) << "\t" << a << "\t" << genie.channel_of_pair[i]
                  << "\t" << genie.best_means[i] << "\n";
    }
    std::cout << "policy " << to_string(genie.policy) << "\n";
    std::cout << "rho* " << std::setprecision(17) << genie.rho_star << "\n";
    if (!lp_dump.empty()) {
        std::ofstream out(lp_dump);
        if (!out) {
            throw Error("io", "cannot write " + lp_dump);
        }
        write_lp(out, build_average_reward_lp(model, genie.best_means, env.sense()));
    }
    return 0;
}

int cmd_simulate(const std::string& config, const Overrides& o, const std::string& out_dir,
                 int threads) {
    const ExperimentSpec spec = load(config, o);
    RunOptions opt;
    opt.threads = threads;
    const AggregateResult r = run_experiment(spec, opt);
    emit_outputs(r, spec, out_dir);
    std::cout << std::setprecision(10);
    std::cout << "rho* " << r.rho_star << "  runs " << r.runs << "  horizon " << r.horizon << "\n";
    for (const auto& l : r.learners) {
        std::cout << l.spec.label << "\tfinal mean regret " << l.stats.mean.back() << " +- "
                  << l.stats.sem.back() << "\tlp solves " << l.lp_solves.front() << "\n";
    }
    std::cout << "wrote " << out_dir << "\n";
    return 0;
}

int cmd_bounds(const std::string& config, const Overrides& o, const std::string& out_dir) {
    const ExperimentSpec spec = load(config, o);
    const auto report = bounds_report(spec);
    std::cout << report.dump(2) << "\n";
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(std::filesystem::path(out_dir) / "bounds.json");
        if (!out) {
            throw Error("io", "cannot write bounds.json under " + out_dir);
        }
        out << report.dump(2) << "\n";
    }
    return 0;
}

int cmd_lowerbound(const std::string& config, double gain, const std::vector<double>& probs) {
    EnvConfig cfg = config.empty() ? EnvConfig{} : load_spec(config).env;
    if (!probs.empty()) {
        cfg.channels.clear();
        for (double p : probs) {
            cfg.channels.push_back(DiscreteChannel::scaled_bernoulli(gain, p));
        }
    }
    const Environment env(cfg);
    if (env.num_channels() < 2) {
        throw Error("config", "the lower bound needs at least two channels");
    }
    const GapConstants g = compute_gaps(env);
    const auto optimal = optimal_channel_set(env);
    const auto lb = lower_bound_constant(cfg.channels, optimal, g.delta3);
    nlohmann::json j;
    j["optimal_channels"] = optimal;
    j["delta3"] = g.delta3;
    j["degenerate"] = lb.degenerate;
    if (lb.degenerate) {
        j["value"] = nullptr;
        j["reason"] = lb.reason;
    } else {
        j["value"] = lb.value;
    }
    nlohmann::json kl = nlohmann::json::array();
    for (int i = 0; i < env.num_channels(); ++i) {
        for (int k = 0; k < env.num_channels(); ++k) {
            if (i == k) {
                continue;
            }
            const auto d = kl_divergence(cfg.channels[i], cfg.channels[k]);
            nlohmann::json e = {{"from", i}, {"to", k}};
            if (!d) {
                e["kl"] = "support mismatch";
            } else if (std::isinf(*d)) {
                e["kl"] = "inf";
            } else {
                e["kl"] = *d;
            }
            kl.push_back(e);
        }
    }
    j["kl"] = kl;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_validate(const std::string& config) {
    const ExperimentSpec spec = load_spec(config);
    validate_spec(spec);
    const Environment env(spec.env);
    const auto report = check_ergodicity_preconditions(env.model(), spec.env.arrivals);
    std::cout << "states " << env.model().num_states() << ", pairs " << env.model().num_pairs()
              << ", channels " << env.num_channels() << "\n";
    for (const auto& v : report.violations) {
        std::cout << "violation: " << v << "\n";
    }
    try {
        const auto policies = enumerate_policies(env.model(), 100'000);
        std::size_t bad = 0;
        for (const auto& p : policies) {
            if (!verify_irreducible_aperiodic(env.model(), p)) {
                if (bad == 0) {
                    std::cout << "policy " << to_string(p) << " induces a chain that is not irreducible and aperiodic\n";
                }
                ++bad;
            }
        }
        std::cout << "exhaustive check: " << policies.size() - bad << " of " << policies.size()
                  << " policies induce an irreducible aperiodic chain\n";
    } catch (const Error& e) {
        if (e.kind() != "enumeration_cap") {
            throw;
        }
        std::cout << "exhaustive check skipped: too many policies\n";
    }
    if (!report.ok) {
        std::cerr << "error: ergodicity: " << report.violations.front() << "\n";
        return kExitInvalid;
    }
    std::cout << "ok\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online power allocation over energy-harvesting MDPs"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    std::string lp_dump;
    Overrides o;
    std::uint64_t seed = 0;
    int runs = 0;
    long horizon = 0;
    int threads = 0;
    double gain = 10.0;
    std::vector<double> probs;

    auto* solve = app.add_subcommand("solve", "Solve the genie LP and print the policy table");
    solve->add_option("--config", config, "Environment or experiment JSON")->required();
    solve->add_option("--lp-dump", lp_dump, "Write the LP in text form to this file");

    auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo experiment and write outputs");
    simulate->add_option("--config", config, "Experiment JSON")->required();
    auto* seed_opt = simulate->add_option("--seed", seed, "Master seed");
    auto* runs_opt = simulate->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
    auto* horizon_opt = simulate->add_option("--horizon", horizon, "Slots per run")->check(CLI::PositiveNumber);
    simulate->add_option("--out", out_dir, "Output directory")->required();
    simulate->add_option("--threads", threads, "Worker threads (default HARVEST_MDP_THREADS)");

    auto* bounds = app.add_subcommand("bounds", "Evaluate gap constants and regret bounds");
    bounds->add_option("--config", config, "Environment or experiment JSON")->required();
    auto* bounds_horizon = bounds->add_option("--horizon", horizon, "Horizon for the multi-channel bound");
    bounds->add_option("--out", out_dir, "Also write bounds.json here");

    auto* lower = app.add_subcommand("lowerbound", "Asymptotic lower-bound constant for the channels");
    lower->add_option("--config", config, "Environment or experiment JSON");
    lower->add_option("--gain", gain, "Common gain of a scaled-Bernoulli family");
    lower->add_option("--bernoulli", probs, "Success probabilities, one channel each");

    auto* validate = app.add_subcommand("validate", "Check a config and the ergodicity conditions");
    validate->add_option("--config", config, "Environment or experiment JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }
    if (*seed_opt) {
        o.seed = seed;
    }
    if (*runs_opt) {
        o.runs = runs;
    }
    if (*horizon_opt || *bounds_horizon) {
        o.horizon = horizon;
    }

    try {
        if (*solve) {
            return cmd_solve(config, lp_dump);
        }
        if (*simulate) {
            return cmd_simulate(config, o, out_dir, threads);
        }
        if (*bounds) {
            return cmd_bounds(config, o, out_dir);
        }
        if (*lower) {
            return cmd_lowerbound(config, gain, probs);
        }
        if (*validate) {
            return cmd_validate(config);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}
