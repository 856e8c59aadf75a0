#include "ehmdp/mdp.hpp"

#include "ehmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace ehmdp {

namespace {

void check_distribution(std::span<const double> probs, const std::string& what) {
    if (probs.empty()) {
        throw Error("invalid_argument", what + ": empty distribution");
    }
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw Error("invalid_argument", what + ": negative or non-finite probability");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << what << ": probabilities sum to " << total;
        throw Error("invalid_argument", msg.str());
    }
}

} // namespace

HarvestDistribution::HarvestDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    check_distribution(probs_, "harvest distribution");
}

HarvestDistribution HarvestDistribution::uniform(int max_units) {
    if (max_units < 0) {
        throw Error("invalid_argument", "harvest support must be non-empty");
    }
    return HarvestDistribution(std::vector<double>(max_units + 1, 1.0 / (max_units + 1)));
}

HarvestDistribution HarvestDistribution::point_mass(int units) {
    std::vector<double> p(units + 1, 0.0);
    p[units] = 1.0;
    return HarvestDistribution(std::move(p));
}

double HarvestDistribution::mass(int units) const {
    if (units < 0 || units > max_units()) {
        return 0.0;
    }
    return probs_[units];
}

double HarvestDistribution::tail_mass(int units) const {
    units = std::max(units, 0);
    double tail = 0.0;
    for (int p = units; p <= max_units(); ++p) {
        tail += probs_[p];
    }
    return tail;
}

MdpModel::MdpModel(std::vector<std::vector<Action>> allowed_actions,
                   std::vector<std::vector<std::vector<double>>> transitions, RewardKind kind)
    : actions_(std::move(allowed_actions)), kind_(kind) {
    const int n = num_states();
    if (n == 0) {
        throw Error("invalid_argument", "model needs at least one state");
    }
    if (static_cast<int>(transitions.size()) != n) {
        throw Error("invalid_argument", "transition table does not match the state count");
    }
    offsets_.reserve(n + 1);
    for (int s = 0; s < n; ++s) {
        const auto& acts = actions_[s];
        if (acts.empty()) {
            throw Error("invalid_argument", "state " + std::to_string(s) + " has no actions");
        }
        if (transitions[s].size() != acts.size()) {
            throw Error("invalid_argument",
                        "state " + std::to_string(s) + ": one transition row per action required");
        }
        auto sorted = acts;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw Error("invalid_argument", "state " + std::to_string(s) + " repeats an action");
        }
        offsets_.push_back(static_cast<int>(pairs_.size()));
        for (std::size_t k = 0; k < acts.size(); ++k) {
            const auto& row = transitions[s][k];
            if (static_cast<int>(row.size()) != n) {
                throw Error("invalid_argument", "transition row has the wrong length");
            }
            check_distribution(row, "transition row (s=" + std::to_string(s) +
                                        ", a=" + std::to_string(acts[k]) + ")");
            pairs_.push_back({s, acts[k]});
            trans_.insert(trans_.end(), row.begin(), row.end());
            labels_.push_back(acts[k]);
        }
    }
    offsets_.push_back(static_cast<int>(pairs_.size()));
    std::sort(labels_.begin(), labels_.end());
    labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
}

std::span<const Action> MdpModel::actions(int s) const {
    return actions_.at(s);
}

std::optional<int> MdpModel::action_position(int s, Action a) const {
    if (s < 0 || s >= num_states()) {
        return std::nullopt;
    }
    const auto& acts = actions_[s];
    auto it = std::find(acts.begin(), acts.end(), a);
    if (it == acts.end()) {
        return std::nullopt;
    }
    return static_cast<int>(it - acts.begin());
}

std::span<const double> MdpModel::row(int pair) const {
    return {trans_.data() + static_cast<std::size_t>(pair) * num_states(),
            static_cast<std::size_t>(num_states())};
}

DeterministicPolicy::DeterministicPolicy(const MdpModel& model, std::vector<Action> action_of)
    : action_of_(std::move(action_of)) {
    if (static_cast<int>(action_of_.size()) != model.num_states()) {
        throw Error("invalid_argument", "policy must assign an action to every state");
    }
    for (int s = 0; s < model.num_states(); ++s) {
        if (!model.is_valid(s, action_of_[s])) {
            throw Error("invalid_argument", "policy action " + std::to_string(action_of_[s]) +
                                                " is not allowed in state " + std::to_string(s));
        }
    }
}

std::string to_string(const DeterministicPolicy& policy) {
    std::string out = "[";
    for (int s = 0; s < policy.num_states(); ++s) {
        if (s > 0) {
            out += ",";
        }
        out += std::to_string(policy(s));
    }
    return out + "]";
}

MdpModel build_transitions(const HarvestDistribution& harvest, int q_max,
                           std::vector<std::vector<Action>> allowed_actions, RewardKind kind) {
    if (q_max < 1) {
        throw Error("invalid_argument", "q_max must be at least 1");
    }
    if (static_cast<int>(allowed_actions.size()) != q_max + 1) {
        throw Error("invalid_argument", "need one action set per battery level 0..q_max");
    }
    std::vector<std::vector<std::vector<double>>> rows(q_max + 1);
    for (int s = 0; s <= q_max; ++s) {
        for (Action a : allowed_actions[s]) {
            if (a < 0 || a > s) {
                throw Error("invalid_argument", "action " + std::to_string(a) +
                                                    " exceeds the stored level " + std::to_string(s));
            }
            std::vector<double> row(q_max + 1, 0.0);
            const int left = s - a;
            for (int next = left; next < q_max; ++next) {
                row[next] = harvest.mass(next - left);
            }
            row[q_max] = harvest.tail_mass(q_max - left);
            rows[s].push_back(std::move(row));
        }
    }
    return MdpModel(std::move(allowed_actions), std::move(rows), kind);
}

std::vector<std::vector<Action>> transmit_action_sets(int q_max) {
    std::vector<std::vector<Action>> sets(q_max + 1);
    sets[0] = {0};
    for (int s = 1; s <= q_max; ++s) {
        for (int a = 1; a <= s; ++a) {
            sets[s].push_back(a);
        }
    }
    return sets;
}

std::vector<std::vector<Action>> packet_action_sets(int q_max) {
    std::vector<std::vector<Action>> sets(q_max + 1);
    for (int s = 0; s <= q_max; ++s) {
        for (int a = 0; a <= s; ++a) {
            sets[s].push_back(a);
        }
    }
    return sets;
}

ErgodicityReport check_ergodicity_preconditions(const MdpModel& model,
                                                const HarvestDistribution& harvest) {
    ErgodicityReport report;
    const int q_max = model.num_states() - 1;
    for (int p = 0; p <= q_max; ++p) {
        if (!(harvest.mass(p) > 0.0)) {
            report.violations.push_back("zero mass at p=" + std::to_string(p));
        }
    }
    for (int s = 1; s < model.num_states(); ++s) {
        if (model.is_valid(s, 0)) {
            report.violations.push_back("action 0 allowed in state s=" + std::to_string(s));
        }
    }
    report.ok = report.violations.empty();
    return report;
}

Matrix induced_chain(const MdpModel& model, const DeterministicPolicy& policy) {
    const int n = model.num_states();
    Matrix chain(n, n);
    for (int s = 0; s < n; ++s) {
        const int k = *model.action_position(s, policy(s));
        auto row = model.row(model.pair_index(s, k));
        for (int next = 0; next < n; ++next) {
            chain(s, next) = row[next];
        }
    }
    return chain;
}

bool is_irreducible_aperiodic(const Matrix& chain) {
    const int n = static_cast<int>(chain.rows());
    // BFS levels from state 0; the period is the gcd of level[u] + 1 - level[v]
    // over all edges u -> v of a strongly connected graph.
    std::vector<int> level(n, -1);
    std::queue<int> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const int u = frontier.front();
        frontier.pop();
        for (int v = 0; v < n; ++v) {
            if (chain(u, v) > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
        }
    }
    if (std::any_of(level.begin(), level.end(), [](int l) { return l < 0; })) {
        return false;
    }
    std::vector<bool> reaches_root(n, false);
    reaches_root[0] = true;
    frontier.push(0);
    while (!frontier.empty()) {
        const int v = frontier.front();
        frontier.pop();
        for (int u = 0; u < n; ++u) {
            if (chain(u, v) > 0.0 && !reaches_root[u]) {
                reaches_root[u] = true;
                frontier.push(u);
            }
        }
    }
    if (std::find(reaches_root.begin(), reaches_root.end(), false) != reaches_root.end()) {
        return false;
    }
    int period = 0;
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) {
            if (chain(u, v) > 0.0) {
                period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
            }
        }
    }
    return period == 1;
}

bool verify_irreducible_aperiodic(const MdpModel& model, const DeterministicPolicy& policy) {
    return is_irreducible_aperiodic(induced_chain(model, policy));
}

StationaryDistribution stationary_distribution(const Matrix& chain) {
    const Eigen::Index n = chain.rows();
    Matrix system = chain.transpose() - Matrix::Identity(n, n);
    system.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;

    Eigen::FullPivLU<Matrix> lu(system);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) {
        throw Error("singular_chain", "chain has no unique stationary distribution");
    }
    Eigen::VectorXd pi = lu.solve(rhs);
    const double residual = (pi.transpose() * chain - pi.transpose()).cwiseAbs().maxCoeff();
    if (!(residual <= 1e-8) || std::abs(pi.sum() - 1.0) > 1e-10) {
        throw Error("singular_chain", "stationary solve is ill-conditioned");
    }
    StationaryDistribution out;
    out.pi.assign(pi.data(), pi.data() + n);
    for (double& p : out.pi) {
        p = std::max(p, 0.0);
    }
    return out;
}

StationaryDistribution stationary_distribution(const MdpModel& model,
                                               const DeterministicPolicy& policy) {
    try {
        return stationary_distribution(induced_chain(model, policy));
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(e.what()) + " for policy " + to_string(policy));
    }
}

double average_reward(const MdpModel& model, const DeterministicPolicy& policy,
                      std::span<const double> mean_rewards) {
    if (static_cast<int>(mean_rewards.size()) != model.num_pairs()) {
        throw Error("invalid_argument", "reward table does not match the model");
    }
    const auto stationary = stationary_distribution(model, policy);
    double rho = 0.0;
    for (int s = 0; s < model.num_states(); ++s) {
        const int k = *model.action_position(s, policy(s));
        rho += stationary.pi[s] * mean_rewards[model.pair_index(s, k)];
    }
    return rho;
}

std::vector<DeterministicPolicy> enumerate_policies(const MdpModel& model, std::size_t cap) {
    const int n = model.num_states();
    std::size_t count = 1;
    for (int s = 0; s < n; ++s) {
        count *= model.actions(s).size();
        if (count > cap) {
            throw Error("enumeration_cap", "more than " + std::to_string(cap) + " policies");
        }
    }
    std::vector<DeterministicPolicy> out;
    out.reserve(count);
    std::vector<int> digit(n, 0);
    std::vector<Action> acts(n);
    for (std::size_t i = 0; i < count; ++i) {
        for (int s = 0; s < n; ++s) {
            acts[s] = model.actions(s)[digit[s]];
        }
        out.emplace_back(model, acts);
        // odometer, last state fastest
        for (int s = n - 1; s >= 0; --s) {
            if (++digit[s] < static_cast<int>(model.actions(s).size())) {
                break;
            }
            digit[s] = 0;
        }
    }
    return out;
}

} // namespace ehmdp
