#include "ehmdp/analysis.hpp"

#include "ehmdp/error.hpp"
#include "ehmdp/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ehmdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGapTolerance = 1e-12;
constexpr double kSeriesTolerance = 1e-12;

bool gain_insensitive(const Environment& env, Action a) {
    return env.config().mode == Mode::EnergyHarvesting && a == 0;
}

Bound refuse(std::string reason) {
    Bound b;
    b.reason = std::move(reason);
    return b;
}

Bound accept(double value, std::string reason = "") {
    Bound b;
    b.ok = true;
    b.value = value;
    b.reason = std::move(reason);
    return b;
}

// mu_max / (1 - gamma), +inf when gamma = 1.
double phase_cost(const GapConstants& g) {
    return g.gamma >= 1.0 ? kInf : g.mu_max / (1.0 - g.gamma);
}

std::optional<std::string> policy_gap_problem(const GapConstants& g) {
    if (!(g.delta1 > 0.0)) {
        return std::string("policy gap is not positive (optimal policy not unique)");
    }
    if (!(g.B0 >= 0.0)) {
        return std::string("reward range B0 is invalid");
    }
    return std::nullopt;
}

// Sums sum_k w(k) exp(-c n0 eta^k) for weights w(k) = eta^k (weighted) or 1.
double doubly_exponential_sum(double c, int n0, int eta, bool weighted) {
    if (n0 < 1 || eta < 2) {
        throw Error("invalid_argument", "series needs n0 >= 1 and eta >= 2");
    }
    if (!(c > 0.0)) {
        throw Error("invalid_argument", "series diverges for a non-positive exponent");
    }
    if (std::isinf(c)) {
        return 0.0;
    }
    const double log_eta = std::log(static_cast<double>(eta));
    double sum = 0.0;
    for (int k = 0; k < 4096; ++k) {
        const double power = std::exp(k * log_eta);
        const double exponent = -c * n0 * power;
        const double term = std::exp((weighted ? k * log_eta : 0.0) + exponent);
        sum += term;
        // ratio of term k + 1 to term k; later ratios are smaller still
        const double ratio =
            std::exp((weighted ? log_eta : 0.0) - c * n0 * power * (eta - 1.0));
        if (ratio < 1.0) {
            const double tail = term * ratio / (1.0 - ratio);
            if (tail <= kSeriesTolerance * sum) {
                return sum;
            }
        }
        if (!std::isfinite(power)) {
            break;
        }
    }
    return sum;
}

} // namespace

GapConstants compute_gaps(const Environment& env, std::size_t policy_cap) {
    const auto& model = env.model();
    const bool maximize = env.sense() == Sense::Maximize;
    const GenieSolution genie = solve_genie(env);
    const int channels = env.num_channels();

    GapConstants g;
    g.rho_star = genie.rho_star;
    g.num_states = model.num_states();
    g.num_actions = model.num_actions();
    g.num_channels = channels;

    // policy gap on the best-channel means
    const auto policies = enumerate_policies(model, policy_cap);
    double runner_up = maximize ? -kInf : kInf;
    double best_enumerated = maximize ? -kInf : kInf;
    for (const auto& beta : policies) {
        const double rho = average_reward(model, beta, genie.best_means);
        best_enumerated = maximize ? std::max(best_enumerated, rho) : std::min(best_enumerated, rho);
        if (beta == genie.policy) {
            continue;
        }
        runner_up = maximize ? std::max(runner_up, rho) : std::min(runner_up, rho);
    }
    if (std::abs(best_enumerated - g.rho_star) > 1e-9) {
        g.warnings.push_back("LP optimum differs from the enumeration optimum by " +
                             std::to_string(std::abs(best_enumerated - g.rho_star)));
    }
    if (policies.size() <= 1) {
        g.delta1 = kInf;
        g.warnings.push_back("only one policy exists; delta1 is undefined (reported as +inf)");
    } else {
        g.delta1 = maximize ? g.rho_star - runner_up : runner_up - g.rho_star;
        if (g.delta1 <= kGapTolerance) {
            g.delta1 = 0.0;
            g.unique_policy = false;
            g.warnings.push_back("optimal policy is not unique; delta1 = 0");
        }
    }
    g.delta4 = g.delta1;

    std::vector<PairValues> means(channels);
    for (int j = 0; j < channels; ++j) {
        means[j] = env.mean_rewards(j);
    }

    // channel gap
    if (channels == 1) {
        g.delta3 = kInf;
    } else {
        double gap = kInf;
        for (int i = 0; i < model.num_pairs(); ++i) {
            const auto& sa = model.pair(i);
            if (gain_insensitive(env, sa.action)) {
                continue;
            }
            const int best = genie.channel_of_pair[i];
            for (int j = 0; j < channels; ++j) {
                if (j == best) {
                    continue;
                }
                const double d = maximize ? means[best][i] - means[j][i] : means[j][i] - means[best][i];
                gap = std::min(gap, d);
            }
        }
        g.delta3 = gap;
        if (gap <= kGapTolerance) {
            g.delta3 = 0.0;
            g.unique_channels = false;
            g.warnings.push_back("some action has more than one best channel; delta3 = 0");
        }
    }

    // reward range over the union of channel supports
    std::set<double> support;
    for (const auto& ch : env.config().channels) {
        support.insert(ch.support().begin(), ch.support().end());
    }
    double range = 0.0;
    for (int i = 0; i < model.num_pairs(); ++i) {
        const auto& sa = model.pair(i);
        double lo = kInf;
        double hi = -kInf;
        for (double x : support) {
            const double f = env.reward()(sa.state, sa.action, x);
            lo = std::min(lo, f);
            hi = std::max(hi, f);
        }
        range = std::max(range, hi - lo);
    }
    g.B0 = range;

    g.mu_max = *std::max_element(genie.best_means.begin(), genie.best_means.end());
    double extreme = maximize ? kInf : -kInf;
    for (const auto& m : means) {
        for (double v : m) {
            extreme = maximize ? std::min(extreme, v) : std::max(extreme, v);
        }
    }
    g.delta_max = maximize ? g.rho_star - extreme : extreme - g.rho_star;

    g.gamma = mixing_gamma(induced_chain(model, genie.policy));
    if (g.gamma >= 1.0) {
        g.warnings.push_back("gamma = 1; the mixing bound is vacuous");
    }
    return g;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw Error("invalid_argument", "distributions have different lengths");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        s += std::abs(p[k] - q[k]);
    }
    return 0.5 * s;
}

double mixing_gamma(const Matrix& chain) {
    return d_hat(chain, 1);
}

double d_hat(const Matrix& chain, int t) {
    if (chain.rows() != chain.cols()) {
        throw Error("invalid_argument", "chain must be square");
    }
    Matrix power = Matrix::Identity(chain.rows(), chain.cols());
    for (int k = 0; k < t; ++k) {
        power = power * chain;
    }
    const int n = static_cast<int>(chain.rows());
    double worst = 0.0;
    std::vector<double> a(n);
    std::vector<double> b(n);
    for (int s = 0; s < n; ++s) {
        for (int r = s + 1; r < n; ++r) {
            for (int k = 0; k < n; ++k) {
                a[k] = power(s, k);
                b[k] = power(r, k);
            }
            worst = std::max(worst, tv_distance(a, b));
        }
    }
    return worst;
}

double d_stationary(const Matrix& chain, std::span<const double> pi, int t) {
    const int n = static_cast<int>(chain.rows());
    if (static_cast<int>(pi.size()) != n) {
        throw Error("invalid_argument", "stationary vector does not match the chain");
    }
    Matrix power = Matrix::Identity(n, n);
    for (int k = 0; k < t; ++k) {
        power = power * chain;
    }
    double worst = 0.0;
    std::vector<double> row(n);
    for (int s = 0; s < n; ++s) {
        for (int k = 0; k < n; ++k) {
            row[k] = power(s, k);
        }
        worst = std::max(worst, tv_distance(pi, row));
    }
    return worst;
}

double p_series(double x) {
    if (!(x > 1.0)) {
        throw Error("invalid_argument", "p-series diverges for x <= 1");
    }
    if (std::isinf(x)) {
        return 1.0;
    }
    constexpr long n = 1'000'000;
    const double nd = static_cast<double>(n);
    double sum = std::pow(nd, 1.0 - x) / (x - 1.0) - 0.5 * std::pow(nd, -x) +
                 x * std::pow(nd, -x - 1.0) / 12.0;
    for (long t = n; t >= 1; --t) {
        sum += std::pow(static_cast<double>(t), -x);
    }
    return sum;
}

double epoch_sigma(double c, int n0, int eta) {
    return doubly_exponential_sum(c, n0, eta, true);
}

double epoch_exp_sum(double c, int n0, int eta) {
    return doubly_exponential_sum(c, n0, eta, false);
}

double count_factor(const GapConstants& g, CountForm form) {
    const double s = g.num_states;
    const double a = g.num_actions;
    return form == CountForm::General ? (1.0 + a) * s : s + a;
}

CountForm default_count_form(const Environment& env) {
    return env.reward().state_dependent() ? CountForm::General : CountForm::StateIndependent;
}

double exponent_c(const GapConstants& g) {
    if (std::isinf(g.delta1) || (g.B0 == 0.0 && g.delta1 > 0.0)) {
        return kInf;
    }
    const double r = g.delta1 / g.B0;
    return 0.5 * r * r;
}

Bound bound_optimal(const GapConstants& g) {
    if (g.gamma >= 1.0) {
        return accept(kInf, "gamma = 1");
    }
    return accept(phase_cost(g));
}

Bound count_bound_lpsm(const GapConstants& g, CountForm form) {
    if (auto why = policy_gap_problem(g)) {
        return refuse(*why);
    }
    return accept(1.0 + count_factor(g, form) / std::expm1(exponent_c(g)));
}

Bound bound_lpsm(const GapConstants& g, CountForm form) {
    const Bound count = count_bound_lpsm(g, form);
    if (!count.ok) {
        return count;
    }
    return accept(count.value * (phase_cost(g) + g.delta_max), g.gamma >= 1.0 ? "gamma = 1" : "");
}

Bound count_bound_epoch(const GapConstants& g, CountForm form, int n0, int eta) {
    if (auto why = policy_gap_problem(g)) {
        return refuse(*why);
    }
    const double c = exponent_c(g);
    const double k = count_factor(g, form);
    const double head = 1.0 + k * (-std::expm1(-c * n0)) / std::expm1(c);
    return accept(head + (eta - 1.0) * k * n0 * epoch_sigma(c, n0, eta));
}

Bound bound_epoch(const GapConstants& g, CountForm form, int n0, int eta) {
    if (auto why = policy_gap_problem(g)) {
        return refuse(*why);
    }
    const double c = exponent_c(g);
    const double k = count_factor(g, form);
    const double head = 1.0 + k * (-std::expm1(-c * n0)) / std::expm1(c);
    const double phase = phase_cost(g);
    const double value = head * (phase + g.delta_max) +
                         (eta - 1.0) * k * n0 * epoch_sigma(c, n0, eta) * g.delta_max +
                         k * epoch_exp_sum(c, n0, eta) * phase;
    return accept(value, g.gamma >= 1.0 ? "gamma = 1" : "");
}

double minimal_w(const GapConstants& g, std::optional<double> d) {
    const double dd = d ? *d : std::min(g.delta3, g.delta4);
    return 2.0 * g.B0 * g.B0 / (dd * dd);
}

Bound bound_mc(const GapConstants& g, int channels, double w, long horizon, std::optional<double> d) {
    const double dd = d ? *d : std::min(g.delta3, g.delta4);
    if (!(dd > 0.0)) {
        return refuse("gap d = min(delta3, delta4) is not positive");
    }
    if (d && *d > std::min(g.delta3, g.delta4)) {
        return refuse("d exceeds min(delta3, delta4)");
    }
    if (horizon < 1) {
        return refuse("horizon must be at least 1");
    }
    const double w_min = minimal_w(g, dd);
    if (!(w > w_min)) {
        Bound b = refuse("w = " + std::to_string(w) + " does not exceed 2 B0^2 / d^2 = " +
                         std::to_string(w_min));
        b.min_w = w_min;
        return b;
    }
    const double x = g.B0 == 0.0 ? kInf : w * dd * dd / (2.0 * g.B0 * g.B0);
    const double m = channels;
    const double a = g.num_actions;
    const double slots =
        m * std::ceil(w * std::log(static_cast<double>(horizon))) + 2.0 * a * m * p_series(x);
    Bound b = accept(slots * (g.delta_max + phase_cost(g)), g.gamma >= 1.0 ? "gamma = 1" : "");
    b.min_w = w_min;
    return b;
}

Bound convergence_time_bound(const GapConstants& g, CountForm form) {
    if (auto why = policy_gap_problem(g)) {
        return refuse(*why);
    }
    const double c = exponent_c(g);
    const double denom = -std::expm1(-c);
    return accept(1.0 + count_factor(g, form) * std::exp(-c) / (denom * denom));
}

std::optional<double> kl_divergence(const DiscreteChannel& p, const DiscreteChannel& q) {
    if (p.support() != q.support()) {
        return std::nullopt;
    }
    double s = 0.0;
    for (std::size_t k = 0; k < p.probs().size(); ++k) {
        const double pk = p.probs()[k];
        const double qk = q.probs()[k];
        if (pk == 0.0) {
            continue;
        }
        if (qk == 0.0) {
            return kInf;
        }
        s += pk * std::log(pk / qk);
    }
    return s;
}

std::vector<int> optimal_channel_set(const Environment& env) {
    const auto& model = env.model();
    const GenieSolution genie = solve_genie(env);
    const auto pi = stationary_distribution(model, genie.policy).pi;
    std::set<int> out;
    for (int s = 0; s < model.num_states(); ++s) {
        const Action a = genie.policy(s);
        if (pi[s] <= 1e-12 || gain_insensitive(env, a)) {
            continue;
        }
        out.insert(genie.channel_of_pair[model.pair_index(s, *model.action_position(s, a))]);
    }
    return {out.begin(), out.end()};
}

LowerBound lower_bound_constant(const std::vector<DiscreteChannel>& channels,
                                const std::vector<int>& optimal, double delta3) {
    LowerBound out;
    const int m = static_cast<int>(channels.size());
    for (int j = 1; j < m; ++j) {
        if (channels[j].support() != channels[0].support()) {
            out.degenerate = true;
            out.reason = "lower bound degenerate (infinite KL): channel supports differ";
            return out;
        }
    }
    if (optimal.empty()) {
        out.degenerate = true;
        out.reason = "no optimal channel";
        return out;
    }
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        if (std::find(optimal.begin(), optimal.end(), i) != optimal.end()) {
            continue;
        }
        double worst = 0.0;
        for (int j : optimal) {
            const double kl = *kl_divergence(channels[i], channels[j]);
            if (kl == 0.0) {
                out.degenerate = true;
                out.reason = "channels " + std::to_string(i) + " and " + std::to_string(j) +
                             " have identical distributions";
                return out;
            }
            worst = std::max(worst, 1.0 / kl);
        }
        total += worst;
    }
    out.value = delta3 * total;
    return out;
}

std::vector<double> regret_trace(std::span<const double> values, double rho_star, Sense sense) {
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t u = 0; u < values.size(); ++u) {
        acc += values[u];
        const double target = static_cast<double>(u + 1) * rho_star;
        out[u] = sense == Sense::Maximize ? target - acc : acc - target;
    }
    return out;
}

void TraceAccumulator::add(std::span<const double> trace) {
    if (trace.size() != mean_.size()) {
        throw Error("invalid_argument", "trace length differs from the accumulator");
    }
    ++runs_;
    const double n = runs_;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        const double delta = trace[t] - mean_[t];
        mean_[t] += delta / n;
        m2_[t] += delta * (trace[t] - mean_[t]);
    }
}

TraceStats TraceAccumulator::stats() const {
    TraceStats s;
    s.runs = runs_;
    s.mean = mean_;
    s.sem.assign(mean_.size(), 0.0);
    if (runs_ > 1) {
        const double n = runs_;
        for (std::size_t t = 0; t < mean_.size(); ++t) {
            s.sem[t] = std::sqrt(std::max(m2_[t], 0.0) / (n - 1.0) / n);
        }
    }
    return s;
}

} // namespace ehmdp
