#include "ehmdp/experiment.hpp"

#include "ehmdp/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace ehmdp {

using nlohmann::json;

namespace {

struct RunOutput {
    std::vector<std::vector<double>> traces;
    std::vector<long> solves;
    std::vector<long> explorations;
    std::vector<long> last_nonoptimal;
    std::vector<bool> final_optimal;
    std::vector<std::string> logs;
};

std::unique_ptr<Learner> make_learner(const LearnerSpec& l, const Environment& env,
                                      const GenieSolution& genie, long horizon) {
    const auto ctx = LearnerContext::from(env);
    switch (l.kind) {
    case LearnerKind::Lpsm:
        return std::make_unique<LpsmLearner>(ctx, l.label);
    case LearnerKind::EpochLpsm:
        return std::make_unique<EpochLpsmLearner>(ctx, l.n0, l.eta, l.label);
    case LearnerKind::McLpsm:
        return std::make_unique<McLpsmLearner>(
            ctx, ExplorationSchedule(l.growth, env.num_channels(), horizon), l.label);
    case LearnerKind::Genie:
        return make_baseline(BaselineKind::Genie, env, genie, std::nullopt, l.label);
    case LearnerKind::Naive:
        return make_baseline(BaselineKind::Naive, env, genie, std::nullopt, l.label);
    case LearnerKind::Fixed:
        return make_baseline(BaselineKind::Fixed, env, genie, DeterministicPolicy(env.model(), l.policy),
                             l.label);
    }
    throw Error("config", "unknown learner kind");
}

bool matches_genie(const Learner& learner, const MdpModel& model, const GenieSolution& genie) {
    const auto& policy = learner.policy();
    if (!policy || *policy != genie.policy) {
        return false;
    }
    const auto& map = learner.channel_map();
    if (map.empty()) {
        return true;
    }
    for (int s = 0; s < model.num_states(); ++s) {
        const int i = model.pair_index(s, *model.action_position(s, genie.policy(s)));
        if (map[i] != genie.channel_of_pair[i]) {
            return false;
        }
    }
    return true;
}

std::string event_line(long t, int state, const Decision& d, const SlotOutcome& out) {
    json e;
    e["t"] = t;
    e["state"] = state;
    e["action"] = d.action;
    e["channel"] = d.channel;
    e["gain"] = out.gain ? json(*out.gain) : json(nullptr);
    e["value"] = out.value;
    e["exploring"] = d.exploring;
    e["lp_solved"] = d.lp_solved;
    return e.dump() + "\n";
}

void simulate_run(const ExperimentSpec& spec, const Environment& env, const GenieSolution& genie,
                  int run, RunOutput& out) {
    const long horizon = spec.horizon;
    const bool log = run < spec.event_log_runs;
    for (const auto& l : spec.learners) {
        auto learner = make_learner(l, env, genie, horizon);
        Rng rng = make_run_rng(spec.seed, static_cast<std::uint64_t>(run));
        int state = spec.env.initial_state;
        std::vector<double> values(horizon);
        long explorations = 0;
        long last_bad = -1;
        std::string events;
        for (long t = 0; t < horizon; ++t) {
            const Decision d = learner->act(t, state);
            const SlotOutcome o = env.step(state, d.action, d.channel, rng);
            learner->observe(t, state, d, o);
            if (d.exploring) {
                ++explorations;
            }
            if (d.exploring || !matches_genie(*learner, env.model(), genie)) {
                last_bad = t;
            }
            if (log) {
                events += event_line(t, state, d, o);
            }
            values[t] = o.value;
            state = o.next_state;
        }
        out.traces.push_back(regret_trace(values, genie.rho_star, env.sense()));
        out.solves.push_back(learner->lp_solve_count());
        out.explorations.push_back(explorations);
        out.last_nonoptimal.push_back(last_bad);
        out.final_optimal.push_back(matches_genie(*learner, env.model(), genie));
        out.logs.push_back(std::move(events));
    }
}

std::optional<long> expected_solves(const LearnerSpec& l, long horizon) {
    switch (l.kind) {
    case LearnerKind::Lpsm:
        return horizon - 1;
    case LearnerKind::EpochLpsm:
        return epoch_solve_count(horizon - 1, l.n0, l.eta);
    case LearnerKind::Genie:
    case LearnerKind::Naive:
    case LearnerKind::Fixed:
        return 0;
    case LearnerKind::McLpsm:
        return std::nullopt;
    }
    return std::nullopt;
}

json number(double x) {
    if (std::isfinite(x)) {
        return x;
    }
    return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

json bound_json(const Bound& b) {
    json j;
    j["ok"] = b.ok;
    j["value"] = b.ok ? number(b.value) : json(nullptr);
    if (!b.reason.empty()) {
        j["reason"] = b.reason;
    }
    if (b.min_w) {
        j["min_w"] = number(*b.min_w);
    }
    return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("io", "cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw Error("io", "write failed for " + path.string());
    }
}

std::string wide_csv(const AggregateResult& r, long first_t) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "t";
    for (const auto& l : r.learners) {
        os << "," << l.spec.label;
    }
    os << "\n";
    for (long t = first_t; t <= r.horizon; ++t) {
        os << t;
        for (const auto& l : r.learners) {
            os << "," << l.stats.mean[t - 1];
        }
        os << "\n";
    }
    return os.str();
}

std::string log_regret_csv(const AggregateResult& r) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "t,learner,mean_cum_regret,cum_regret_over_ln_t\n";
    for (const auto& l : r.learners) {
        for (long t = 2; t <= r.horizon; ++t) {
            const double m = l.stats.mean[t - 1];
            os << t << "," << l.spec.label << "," << m << "," << m / std::log(static_cast<double>(t))
               << "\n";
        }
    }
    return os.str();
}

} // namespace

int worker_count(int requested, int runs) {
    int n = requested;
    if (n <= 0) {
        if (const char* env = std::getenv("HARVEST_MDP_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            if (end == env || *end != '\0' || v < 1) {
                throw Error("config", "HARVEST_MDP_THREADS must be a positive integer");
            }
            n = static_cast<int>(std::min<long>(v, 1024));
        } else {
            n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        }
    }
    return std::max(1, std::min(n, runs));
}

AggregateResult run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
    validate_spec(spec);
    const auto start = std::chrono::steady_clock::now();
    const Environment env(spec.env);
    const GenieSolution genie = solve_genie(env);

    AggregateResult result;
    result.genie_policy = genie.policy.actions();
    result.genie_channels = genie.channel_of_pair;
    result.rho_star = genie.rho_star;
    result.sense = env.sense();
    result.horizon = spec.horizon;
    result.runs = spec.runs;
    result.threads = worker_count(options.threads, spec.runs);

    std::vector<RunOutput> outputs(spec.runs);
    std::atomic<int> next{0};
    std::mutex error_mutex;
    int error_run = std::numeric_limits<int>::max();
    std::string error_kind;
    std::string error_message;

    auto worker = [&] {
        for (;;) {
            const int run = next.fetch_add(1);
            if (run >= spec.runs) {
                return;
            }
            try {
                simulate_run(spec, env, genie, run, outputs[run]);
            } catch (const Error& e) {
                std::lock_guard lock(error_mutex);
                if (run < error_run) {
                    error_run = run;
                    error_kind = e.kind();
                    error_message = e.what();
                }
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (run < error_run) {
                    error_run = run;
                    error_kind = "internal";
                    error_message = e.what();
                }
            }
        }
    };
    if (result.threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < result.threads; ++k) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (error_run != std::numeric_limits<int>::max()) {
        throw Error(error_kind, "run " + std::to_string(error_run) + ": " + error_message);
    }

    const std::size_t count = spec.learners.size();
    for (std::size_t k = 0; k < count; ++k) {
        const auto& l = spec.learners[k];
        LearnerResult lr;
        lr.spec = l;
        lr.expected_lp_solves = expected_solves(l, spec.horizon);
        if (l.kind == LearnerKind::McLpsm) {
            lr.lp_solve_ceiling = ExplorationSchedule(l.growth, env.num_channels(), spec.horizon)
                                      .count(spec.horizon);
        }
        TraceAccumulator acc(spec.horizon);
        for (int run = 0; run < spec.runs; ++run) {
            auto& o = outputs[run];
            acc.add(o.traces[k]);
            const long solves = o.solves[k];
            if (lr.expected_lp_solves && solves != *lr.expected_lp_solves) {
                throw Error("invariant", l.label + " run " + std::to_string(run) + " solved " +
                                             std::to_string(solves) + " LPs, expected " +
                                             std::to_string(*lr.expected_lp_solves));
            }
            if (lr.lp_solve_ceiling && solves > *lr.lp_solve_ceiling) {
                throw Error("invariant", l.label + " run " + std::to_string(run) + " solved " +
                                             std::to_string(solves) + " LPs, more than |R(T)| = " +
                                             std::to_string(*lr.lp_solve_ceiling));
            }
            lr.lp_solves.push_back(solves);
            lr.explorations.push_back(o.explorations[k]);
            lr.last_nonoptimal.push_back(o.last_nonoptimal[k]);
            lr.final_optimal.push_back(o.final_optimal[k]);
            if (run < spec.event_log_runs) {
                lr.event_logs.push_back(std::move(o.logs[k]));
            }
            if (options.keep_traces) {
                lr.traces.push_back(std::move(o.traces[k]));
            } else {
                std::vector<double>().swap(o.traces[k]);
            }
        }
        lr.stats = acc.stats();
        result.learners.push_back(std::move(lr));
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

json bounds_report(const ExperimentSpec& spec) {
    const Environment env(spec.env);
    const GapConstants g = compute_gaps(env);
    const CountForm form = default_count_form(env);
    const GenieSolution genie = solve_genie(env);

    json j;
    j["constants"] = {{"rho_star", number(g.rho_star)}, {"delta1", number(g.delta1)},
                      {"delta3", number(g.delta3)},     {"delta4", number(g.delta4)},
                      {"B0", number(g.B0)},             {"mu_max", number(g.mu_max)},
                      {"delta_max", number(g.delta_max)}, {"gamma", number(g.gamma)},
                      {"S", g.num_states},              {"A", g.num_actions},
                      {"M", g.num_channels}};
    j["count_form"] = form == CountForm::General ? "(1+A)S" : "S+A";
    j["genie"] = {{"policy", genie.policy.actions()}, {"channel_of_pair", genie.channel_of_pair}};
    j["optimal"] = bound_json(bound_optimal(g));
    if (g.num_channels == 1) {
        j["lpsm"] = bound_json(bound_lpsm(g, form));
        j["lpsm_general_form"] = bound_json(bound_lpsm(g, CountForm::General));
        j["lpsm_nonoptimal_slots"] = bound_json(count_bound_lpsm(g, form));
        j["convergence_time"] = bound_json(convergence_time_bound(g, form));
    }
    json learners = json::array();
    for (const auto& l : spec.learners) {
        json e;
        e["label"] = l.label;
        e["kind"] = to_string(l.kind);
        switch (l.kind) {
        case LearnerKind::Lpsm:
            e["regret"] = bound_json(bound_lpsm(g, form));
            break;
        case LearnerKind::EpochLpsm:
            e["n0"] = l.n0;
            e["eta"] = l.eta;
            e["regret"] = bound_json(bound_epoch(g, form, l.n0, l.eta));
            e["nonoptimal_slots"] = bound_json(count_bound_epoch(g, form, l.n0, l.eta));
            break;
        case LearnerKind::McLpsm:
            if (l.growth.kind == GrowthSpec::Kind::Constant) {
                e["w"] = l.growth.w;
                e["regret"] = bound_json(bound_mc(g, g.num_channels, l.growth.w, spec.horizon));
            } else {
                Bound b;
                b.reason = "the closed-form bound covers a constant w only";
                e["regret"] = bound_json(b);
            }
            e["min_w"] = number(minimal_w(g));
            break;
        case LearnerKind::Genie:
            e["regret"] = bound_json(bound_optimal(g));
            break;
        case LearnerKind::Naive:
        case LearnerKind::Fixed:
            break;
        }
        learners.push_back(e);
    }
    j["learners"] = learners;
    if (g.num_channels > 1) {
        const auto optimal = optimal_channel_set(env);
        const auto lb = lower_bound_constant(env.config().channels, optimal, g.delta3);
        j["lower_bound"] = {{"optimal_channels", optimal},
                            {"degenerate", lb.degenerate},
                            {"value", lb.degenerate ? json(nullptr) : number(lb.value)}};
        if (!lb.reason.empty()) {
            j["lower_bound"]["reason"] = lb.reason;
        }
        j["min_w"] = number(minimal_w(g));
    }
    j["warnings"] = g.warnings;
    return j;
}

void write_aggregate_csv(std::ostream& os, const AggregateResult& r) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << std::setprecision(17);
    os << "t,learner,mean_cum_regret,stderr,runs\n";
    for (const auto& l : r.learners) {
        for (long t = 1; t <= r.horizon; ++t) {
            os << t << "," << l.spec.label << "," << l.stats.mean[t - 1] << "," << l.stats.sem[t - 1]
               << "," << l.stats.runs << "\n";
        }
    }
    os.flags(flags);
    os.precision(precision);
}

void emit_outputs(const AggregateResult& r, const ExperimentSpec& spec,
                  const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw Error("io", "cannot create " + out_dir.string() + ": " + ec.message());
    }
    {
        std::ostringstream os;
        write_aggregate_csv(os, r);
        write_text(out_dir / "aggregate.csv", os.str());
    }
    {
        std::ostringstream os;
        os << "learner,run,lp_solves,explorations,last_nonoptimal_slot,final_policy_optimal\n";
        for (const auto& l : r.learners) {
            for (int run = 0; run < r.runs; ++run) {
                os << l.spec.label << "," << run << "," << l.lp_solves[run] << "," << l.explorations[run]
                   << "," << l.last_nonoptimal[run] << "," << (l.final_optimal[run] ? 1 : 0) << "\n";
            }
        }
        write_text(out_dir / "solves.csv", os.str());
    }
    {
        json s;
        s["rho_star"] = r.rho_star;
        s["genie_policy"] = r.genie_policy;
        s["horizon"] = r.horizon;
        s["runs"] = r.runs;
        s["seed"] = spec.seed;
        s["threads"] = r.threads;
        s["wall_seconds"] = r.wall_seconds;
        json learners = json::array();
        for (const auto& l : r.learners) {
            json e;
            e["label"] = l.spec.label;
            e["kind"] = to_string(l.spec.kind);
            e["final_mean_cum_regret"] = l.stats.mean.back();
            e["final_stderr"] = l.stats.sem.back();
            const auto [lo, hi] = std::minmax_element(l.lp_solves.begin(), l.lp_solves.end());
            e["lp_solves"] = {{"min", *lo}, {"max", *hi}};
            if (l.expected_lp_solves) {
                e["lp_solves"]["expected"] = *l.expected_lp_solves;
            }
            if (l.lp_solve_ceiling) {
                e["lp_solves"]["ceiling"] = *l.lp_solve_ceiling;
            }
            double z_mean = 0.0;
            double z_m2 = 0.0;
            double explore = 0.0;
            double optimal = 0.0;
            for (int run = 0; run < r.runs; ++run) {
                const double z = static_cast<double>(l.last_nonoptimal[run] + 1);
                const double delta = z - z_mean;
                z_mean += delta / (run + 1);
                z_m2 += delta * (z - z_mean);
                explore += static_cast<double>(l.explorations[run]);
                optimal += l.final_optimal[run] ? 1.0 : 0.0;
            }
            const double z_se = r.runs > 1 ? std::sqrt(z_m2 / (r.runs - 1.0) / r.runs) : 0.0;
            e["convergence_time"] = {{"mean", z_mean},
                                     {"stderr", z_se},
                                     {"ci95_low", z_mean - 1.96 * z_se},
                                     {"ci95_high", z_mean + 1.96 * z_se}};
            e["mean_explorations"] = explore / r.runs;
            e["final_optimal_fraction"] = optimal / r.runs;
            learners.push_back(e);
        }
        s["learners"] = learners;
        write_text(out_dir / "summary.json", s.dump(2) + "\n");
    }
    write_text(out_dir / "bounds.json", bounds_report(spec).dump(2) + "\n");
    if (spec.figure == "regret_vs_t") {
        write_text(out_dir / "regret_vs_t.csv", wide_csv(r, 1));
    } else if (spec.figure == "epoch_sweep") {
        write_text(out_dir / "epoch_sweep.csv", wide_csv(r, 1));
    } else if (spec.figure == "regret_over_log_t") {
        write_text(out_dir / "regret_over_log_t.csv", log_regret_csv(r));
    }
    bool any_logs = false;
    for (const auto& l : r.learners) {
        any_logs = any_logs || !l.event_logs.empty();
    }
    if (any_logs) {
        const auto dir = out_dir / "events";
        std::filesystem::create_directories(dir, ec);
        if (ec) {
            throw Error("io", "cannot create " + dir.string() + ": " + ec.message());
        }
        for (const auto& l : r.learners) {
            for (std::size_t run = 0; run < l.event_logs.size(); ++run) {
                write_text(dir / (l.spec.label + "_run" + std::to_string(run) + ".ndjson"),
                           l.event_logs[run]);
            }
        }
    }
}

} // namespace ehmdp
