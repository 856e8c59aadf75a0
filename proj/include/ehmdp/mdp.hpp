#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ehmdp {

/// Integer power (or packet) units chosen as the action in a slot.
using Action = int;

/// Values attached to every valid (state, action) pair, laid out in
/// MdpModel::pair_index order. Used for mean rewards, estimates and occupancies.
using PairValues = std::vector<double>;

using Matrix = Eigen::MatrixXd;

inline constexpr double kDistributionTolerance = 1e-12;

/// Distribution of the per-slot harvested energy (or packet arrivals) over
/// 0, 1, ..., max_units().
class HarvestDistribution {
public:
    explicit HarvestDistribution(std::vector<double> probs);

    static HarvestDistribution uniform(int max_units);
    static HarvestDistribution point_mass(int units);

    int max_units() const { return static_cast<int>(probs_.size()) - 1; }
    const std::vector<double>& probs() const { return probs_; }

    /// Pr{p = units}; zero outside the support.
    double mass(int units) const;
    /// Pr{p >= units}.
    double tail_mass(int units) const;

private:
    std::vector<double> probs_;
};

/// Whether the per-slot value is a reward to maximize or a cost to minimize.
enum class RewardKind { Rate, Cost };

struct StateAction {
    int state;
    Action action;
};

/// Finite MDP with per-state action sets and dense transition rows.
/// Immutable after construction.
class MdpModel {
public:
    /// transitions[s][k] is the row P(. | s, allowed_actions[s][k]).
    MdpModel(std::vector<std::vector<Action>> allowed_actions,
             std::vector<std::vector<std::vector<double>>> transitions,
             RewardKind kind = RewardKind::Rate);

    int num_states() const { return static_cast<int>(actions_.size()); }
    int num_pairs() const { return static_cast<int>(pairs_.size()); }
    RewardKind reward_kind() const { return kind_; }

    std::span<const Action> actions(int s) const;
    /// Sorted union of all action labels, the set A.
    const std::vector<Action>& action_labels() const { return labels_; }
    int num_actions() const { return static_cast<int>(labels_.size()); }

    int pair_index(int s, int k) const { return offsets_[s] + k; }
    int pair_begin(int s) const { return offsets_[s]; }
    const StateAction& pair(int index) const { return pairs_[index]; }
    /// Position of action a inside actions(s), if valid.
    std::optional<int> action_position(int s, Action a) const;
    bool is_valid(int s, Action a) const { return action_position(s, a).has_value(); }

    std::span<const double> row(int pair) const;
    double prob(int pair, int next) const { return trans_[pair * num_states() + next]; }

private:
    std::vector<std::vector<Action>> actions_;
    std::vector<Action> labels_;
    std::vector<int> offsets_;
    std::vector<StateAction> pairs_;
    std::vector<double> trans_;
    RewardKind kind_;
};

/// Tabulate f(s, a) over all valid pairs of the model.
template <class F>
PairValues tabulate(const MdpModel& model, F&& f) {
    PairValues out(model.num_pairs());
    for (int i = 0; i < model.num_pairs(); ++i) {
        const auto& sa = model.pair(i);
        out[i] = f(sa.state, sa.action);
    }
    return out;
}

/// Total map state -> action with action_of(s) in A_s.
class DeterministicPolicy {
public:
    DeterministicPolicy(const MdpModel& model, std::vector<Action> action_of);

    Action operator()(int s) const { return action_of_[s]; }
    const std::vector<Action>& actions() const { return action_of_; }
    int num_states() const { return static_cast<int>(action_of_.size()); }

    friend bool operator==(const DeterministicPolicy&, const DeterministicPolicy&) = default;

private:
    std::vector<Action> action_of_;
};

std::string to_string(const DeterministicPolicy& policy);

struct StationaryDistribution {
    std::vector<double> pi;
};

/// Battery dynamics Q' = min(Q - a + p, q_max). Excess harvest is folded into
/// the cap state. Throws Error("invalid_argument") when a > s or the harvest
/// distribution does not match.
MdpModel build_transitions(const HarvestDistribution& harvest, int q_max,
                           std::vector<std::vector<Action>> allowed_actions,
                           RewardKind kind = RewardKind::Rate);

/// Action sets {0} at s = 0 and {1, ..., s} otherwise (the transmitter must
/// send when it has energy).
std::vector<std::vector<Action>> transmit_action_sets(int q_max);
/// Action sets {0, ..., s}: any number of queued packets may be sent.
std::vector<std::vector<Action>> packet_action_sets(int q_max);

struct ErgodicityReport {
    bool ok = true;
    std::vector<std::string> violations;
};

/// Sufficient conditions for every policy to induce an irreducible aperiodic
/// chain: Pr{p} > 0 for 0 <= p <= q_max, and 0 is never allowed when s > 0.
ErgodicityReport check_ergodicity_preconditions(const MdpModel& model,
                                                const HarvestDistribution& harvest);

/// Transition matrix P_beta of the chain induced by a policy.
Matrix induced_chain(const MdpModel& model, const DeterministicPolicy& policy);

/// True iff the chain has a single communicating class covering every state
/// and period 1.
bool is_irreducible_aperiodic(const Matrix& chain);
bool verify_irreducible_aperiodic(const MdpModel& model, const DeterministicPolicy& policy);

/// Solves pi P = pi, sum(pi) = 1 by a dense direct solve with one balance
/// equation replaced by the normalization row. Throws Error("singular_chain")
/// when the chain has no unique stationary distribution.
StationaryDistribution stationary_distribution(const Matrix& chain);
StationaryDistribution stationary_distribution(const MdpModel& model,
                                               const DeterministicPolicy& policy);

/// rho(beta) = sum_s pi_beta(s) mu(s, beta(s)).
double average_reward(const MdpModel& model, const DeterministicPolicy& policy,
                      std::span<const double> mean_rewards);

inline constexpr std::size_t kDefaultPolicyCap = 1'000'000;

/// Every deterministic stationary policy, in lexicographic order of action
/// positions. Throws Error("enumeration_cap") when the count exceeds cap.
std::vector<DeterministicPolicy> enumerate_policies(const MdpModel& model,
                                                    std::size_t cap = kDefaultPolicyCap);

} // namespace ehmdp
