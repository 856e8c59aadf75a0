#pragma once

#include "ehmdp/env.hpp"
#include "ehmdp/lp.hpp"
#include "ehmdp/mdp.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ehmdp {

/// What a learner may know: the transition model, the reward function f and
/// the number of channels. Channel distributions are deliberately absent.
struct LearnerContext {
    const MdpModel* model = nullptr;
    RewardFunction reward;
    int channels = 1;

    static LearnerContext from(const Environment& env);
    Sense sense() const { return reward.sense(); }
};

/// Sample-mean estimates of f over observed gains, one block of cells per
/// channel. Cells are actions when f ignores the state, else (s, a) pairs.
/// Every observation on a channel updates all of that channel's cells.
class EstimateTable {
public:
    enum class Indexing { PerAction, PerPair };

    EstimateTable(const LearnerContext& ctx, int channels);

    void observe(int channel, double gain);

    Indexing indexing() const { return indexing_; }
    long count(int channel) const { return counts_.at(channel); }
    double theta(int channel, int state, Action a) const;
    /// theta_j expanded over the model's pairs.
    PairValues pair_values(int channel) const;

private:
    int cell_of_pair(int pair) const { return cell_of_pair_[pair]; }

    const MdpModel* model_;
    RewardFunction reward_;
    Indexing indexing_;
    std::vector<StateAction> cells_;
    std::vector<int> cell_of_pair_;
    std::vector<std::vector<double>> theta_;
    std::vector<long> counts_;
};

/// g(t) in the exploration rule |R(t-1)| < M ceil(g(t) ln t).
struct GrowthSpec {
    enum class Kind { Constant, LogLog, Table };
    Kind kind = Kind::Constant;
    /// Constant: g = w. LogLog: g = w max(1, ln ln t).
    double w = 1.0;
    /// Table: g(t) = table[t - 1], last entry repeated beyond the table.
    std::vector<double> table;

    double operator()(long t) const;
    static GrowthSpec constant(double w) { return {Kind::Constant, w, {}}; }
};

/// Deterministic exploration slots over 1..T. Slot 1 is always included;
/// t > 1 is included iff |R(t-1)| < M ceil(g(t) ln t).
class ExplorationSchedule {
public:
    ExplorationSchedule(GrowthSpec growth, int channels, long horizon);
    ExplorationSchedule(double w, int channels, long horizon)
        : ExplorationSchedule(GrowthSpec::constant(w), channels, horizon) {}

    bool contains(long n) const { return n >= 1 && n <= horizon_ && member_[n]; }
    /// |R(n)|, n clamped to the horizon.
    long count(long n) const;
    long horizon() const { return horizon_; }
    int channels() const { return channels_; }
    const GrowthSpec& growth() const { return growth_; }

private:
    GrowthSpec growth_;
    int channels_;
    long horizon_;
    std::vector<bool> member_;
    std::vector<long> prefix_;
};

struct Decision {
    Action action = 0;
    int channel = 0;
    bool exploring = false;
    bool lp_solved = false;
};

/// Online decision rule. Slots are numbered t = 0, 1, ...; act(t, s) is
/// followed by observe() with that slot's outcome.
class Learner {
public:
    explicit Learner(std::string name) : name_(std::move(name)) {}
    virtual ~Learner() = default;

    const std::string& name() const { return name_; }
    virtual Decision act(long t, int state) = 0;
    virtual void observe(long t, int state, const Decision& decision, const SlotOutcome& outcome) = 0;

    long lp_solve_count() const { return lp_solves_; }
    /// Stationary policy currently in force, if any.
    const std::optional<DeterministicPolicy>& policy() const { return policy_; }
    /// Channel per model pair currently in force, if any.
    const std::vector<int>& channel_map() const { return channel_map_; }

protected:
    std::optional<DeterministicPolicy> policy_;
    std::vector<int> channel_map_;
    long lp_solves_ = 0;

private:
    std::string name_;
};

Action smallest_action(const MdpModel& model, int state);

/// Solves the LP on theta every slot from t = 1.
class LpsmLearner : public Learner {
public:
    explicit LpsmLearner(const LearnerContext& ctx, std::string name = "lpsm");

    Decision act(long t, int state) override;
    void observe(long t, int state, const Decision& decision, const SlotOutcome& outcome) override;

    const EstimateTable& estimates() const { return table_; }

protected:
    void solve(long t);

    LearnerContext ctx_;
    EstimateTable table_;
};

/// True iff t is an LP slot: 1 <= t < n0, or t = n0 eta^k for some k >= 0.
bool epoch_solve_slot(long t, int n0, int eta);
/// (n0 - 1) + #{k >= 0 : n0 eta^k <= last_slot}; slots 0..last_slot.
long epoch_solve_count(long last_slot, int n0, int eta);

/// LPSM that solves only on epoch_solve_slot() and replays the cached policy.
class EpochLpsmLearner : public LpsmLearner {
public:
    EpochLpsmLearner(const LearnerContext& ctx, int n0, int eta, std::string name = "epoch_lpsm");

    Decision act(long t, int state) override;

    int n0() const { return n0_; }
    int eta() const { return eta_; }

private:
    int n0_;
    int eta_;
};

/// Round-robin channel exploration on the schedule; between explorations, one
/// LP on the best-channel estimates and the resulting (policy, channel map).
class McLpsmLearner : public Learner {
public:
    McLpsmLearner(const LearnerContext& ctx, ExplorationSchedule schedule,
                  std::string name = "mc_lpsm");

    Decision act(long t, int state) override;
    void observe(long t, int state, const Decision& decision, const SlotOutcome& outcome) override;

    const EstimateTable& estimates() const { return table_; }
    const ExplorationSchedule& schedule() const { return schedule_; }
    /// phi(a) for every action label (channel index, 0-based), from the last solve.
    std::vector<int> action_channel_map() const;

private:
    LearnerContext ctx_;
    ExplorationSchedule schedule_;
    EstimateTable table_;
    bool resolve_ = true;
};

/// Plays one stationary policy and channel map forever.
class FixedPolicyLearner : public Learner {
public:
    FixedPolicyLearner(const MdpModel& model, std::string name, DeterministicPolicy policy,
                       std::vector<int> channel_of_pair);

    Decision act(long t, int state) override;
    void observe(long, int, const Decision&, const SlotOutcome&) override {}

private:
    const MdpModel* model_;
};

/// The genie's solution with every mean known.
struct GenieSolution {
    DeterministicPolicy policy;
    std::vector<int> channel_of_pair;
    PairValues best_means;
    double rho_star = 0.0;
};

/// mu*(s, a) = best channel mean per pair (ties to the smallest channel) and
/// the LP optimum on mu*.
GenieSolution solve_genie(const Environment& env);

/// Spend everything stored: the largest allowed action in each state.
DeterministicPolicy naive_policy(const MdpModel& model);

enum class BaselineKind { Genie, Naive, Fixed };

/// genie = (beta*, phi*); naive = (spend-all, phi*); fixed = (given policy, phi*).
std::unique_ptr<Learner> make_baseline(BaselineKind kind, const Environment& env,
                                       const GenieSolution& genie,
                                       const std::optional<DeterministicPolicy>& fixed = std::nullopt,
                                       std::string name = "");

} // namespace ehmdp
