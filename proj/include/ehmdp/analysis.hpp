#pragma once

#include "ehmdp/env.hpp"
#include "ehmdp/lp.hpp"
#include "ehmdp/mdp.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ehmdp {

/// Constants that enter the regret bounds. In cost mode every gap is measured
/// in the direction of improvement, so all of them stay non-negative.
struct GapConstants {
    double rho_star = 0.0;
    /// Policy gap on the best-channel means (equals delta4; delta1 for M = 1).
    double delta1 = 0.0;
    /// Channel gap; +inf with a single channel.
    double delta3 = 0.0;
    double delta4 = 0.0;
    double B0 = 0.0;
    double mu_max = 0.0;
    double delta_max = 0.0;
    double gamma = 0.0;
    int num_states = 0;
    int num_actions = 0;
    int num_channels = 1;
    bool unique_policy = true;
    bool unique_channels = true;
    std::vector<std::string> warnings;
};

GapConstants compute_gaps(const Environment& env, std::size_t policy_cap = kDefaultPolicyCap);

/// 0.5 sum |p - q|. Throws Error("invalid_argument") on a length mismatch.
double tv_distance(std::span<const double> p, std::span<const double> q);

/// max over row pairs of tv_distance; d_hat(1).
double mixing_gamma(const Matrix& chain);
/// max over row pairs of P^t.
double d_hat(const Matrix& chain, int t);
/// max_s tv(pi, P^t(s, .)).
double d_stationary(const Matrix& chain, std::span<const double> pi, int t);
inline double d_bound(double gamma, int t) { return std::pow(gamma, t); }

/// sum_{t >= 1} t^-x for x > 1: 10^6 terms summed smallest first plus an
/// Euler-Maclaurin tail. Throws Error("invalid_argument") for x <= 1.
double p_series(double x);

/// sum_{k >= 0} eta^k exp(-c n0 eta^k) and sum_{k >= 0} exp(-c n0 eta^k),
/// truncated once the geometric tail bound drops below 1e-12 of the sum.
double epoch_sigma(double c, int n0, int eta);
double epoch_exp_sum(double c, int n0, int eta);

/// Multiplier in front of the exponential concentration terms: (1 + A) S in
/// general, S + A when the reward does not depend on the state.
enum class CountForm { General, StateIndependent };
double count_factor(const GapConstants& gaps, CountForm form);
CountForm default_count_form(const Environment& env);

/// A bound value or the reason it cannot be evaluated.
struct Bound {
    bool ok = false;
    double value = 0.0;
    std::string reason;
    std::optional<double> min_w;
};

/// 0.5 (delta1 / B0)^2.
double exponent_c(const GapConstants& gaps);

Bound bound_optimal(const GapConstants& gaps);
Bound bound_lpsm(const GapConstants& gaps, CountForm form);
Bound bound_epoch(const GapConstants& gaps, CountForm form, int n0, int eta);
/// d defaults to min(delta3, delta4).
Bound bound_mc(const GapConstants& gaps, int channels, double w, long horizon,
               std::optional<double> d = std::nullopt);
/// Smallest w the multi-channel bound admits: 2 B0^2 / d^2.
double minimal_w(const GapConstants& gaps, std::optional<double> d = std::nullopt);

/// Expected number of slots with a non-optimal policy.
Bound count_bound_lpsm(const GapConstants& gaps, CountForm form);
Bound count_bound_epoch(const GapConstants& gaps, CountForm form, int n0, int eta);
/// E[Z] <= 1 + K e^-c / (1 - e^-c)^2.
Bound convergence_time_bound(const GapConstants& gaps, CountForm form);

/// sum p_k ln(p_k / q_k) on a common support. nullopt when the supports
/// differ; +inf when q_k = 0 < p_k.
std::optional<double> kl_divergence(const DiscreteChannel& p, const DiscreteChannel& q);

/// Channels j with phi*(beta*(s)) = j for some s of positive stationary mass.
std::vector<int> optimal_channel_set(const Environment& env);

struct LowerBound {
    bool degenerate = false;
    double value = 0.0;
    std::string reason;
};

/// delta3 sum_{i not in O} max_{j in O} 1 / I(psi_i, psi_j).
LowerBound lower_bound_constant(const std::vector<DiscreteChannel>& channels,
                                const std::vector<int>& optimal, double delta3);

/// R(t) for t = 1..T (element t - 1) from per-slot values r_0..r_{T-1}.
std::vector<double> regret_trace(std::span<const double> values, double rho_star, Sense sense);

struct TraceStats {
    std::vector<double> mean;
    std::vector<double> sem;
    int runs = 0;
};

/// Mean and standard error per slot, accumulated in the given order.
class TraceAccumulator {
public:
    explicit TraceAccumulator(std::size_t length) : mean_(length, 0.0), m2_(length, 0.0) {}

    void add(std::span<const double> trace);
    TraceStats stats() const;
    int runs() const { return runs_; }

private:
    std::vector<double> mean_;
    std::vector<double> m2_;
    int runs_ = 0;
};

} // namespace ehmdp
