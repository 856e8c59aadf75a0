#pragma once

#include "ehmdp/lp.hpp"
#include "ehmdp/mdp.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace ehmdp {

using Rng = std::mt19937_64;

/// Independent stream for one Monte-Carlo run. The same (seed, run) pair gives
/// the same stream regardless of scheduling.
Rng make_run_rng(std::uint64_t master_seed, std::uint64_t run_index);

/// Finite-support gain-to-noise distribution. Support is sorted and distinct.
class DiscreteChannel {
public:
    DiscreteChannel(std::vector<double> support, std::vector<double> probs);

    /// Gain `gain` with probability p, 0 otherwise.
    static DiscreteChannel scaled_bernoulli(double gain, double p);
    static DiscreteChannel deterministic(double gain);

    const std::vector<double>& support() const { return support_; }
    const std::vector<double>& probs() const { return probs_; }
    double min_gain() const { return support_.front(); }
    double max_gain() const { return support_.back(); }
    double mean_gain() const;

    double sample(Rng& rng) const;

private:
    std::vector<double> support_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
};

/// B log2(1 + a x).
double rate(Action a, double gain, double bandwidth = 1.0);

/// Recovers the gain from an observed rate; nullopt when a == 0 (the rate does
/// not depend on the gain then).
std::optional<double> invert_rate(Action a, double observed_rate, double bandwidth = 1.0);

/// Closed-form expectation of rate(a, X) over the channel.
double mean_rate(Action a, const DiscreteChannel& channel, double bandwidth = 1.0);

struct CostWeights {
    double delay = 1.0;
    double power = 1.0;
};

/// w_d (queue - sent) + w_p x 2^(sent / B).
double packet_cost(int queue, Action sent, double gain, const CostWeights& weights,
                   double bandwidth = 1.0);

enum class Mode { EnergyHarvesting, PacketScheduling };
enum class GainObservation { Oracle, Realistic };

/// Known per-slot reward/cost map f(s, a, x) and its inverse in x.
struct RewardFunction {
    Mode mode = Mode::EnergyHarvesting;
    double bandwidth = 1.0;
    CostWeights weights;

    double operator()(int state, Action a, double gain) const;
    std::optional<double> invert(int state, Action a, double observed) const;
    bool state_dependent() const { return mode == Mode::PacketScheduling; }
    Sense sense() const { return mode == Mode::EnergyHarvesting ? Sense::Maximize : Sense::Minimize; }
};

struct EnvConfig {
    Mode mode = Mode::EnergyHarvesting;
    /// Harvested energy per slot, or packet arrivals in packet mode.
    HarvestDistribution arrivals = HarvestDistribution::uniform(4);
    int q_max = 4;
    double bandwidth = 1.0;
    std::vector<DiscreteChannel> channels{DiscreteChannel::scaled_bernoulli(10.0, 0.2)};
    CostWeights weights;
    GainObservation observation = GainObservation::Oracle;
    int initial_state = 0;
    /// Empty means the mode default (transmit_action_sets / packet_action_sets).
    std::vector<std::vector<Action>> actions;

    int num_channels() const { return static_cast<int>(channels.size()); }
};

/// Outcome of one slot. `gain` is present iff the agent may observe it.
struct SlotOutcome {
    int next_state = 0;
    std::optional<double> gain;
    double value = 0.0;
    int channel = 0;
};

/// Stochastic environment built from an EnvConfig. Holds no per-run state;
/// callers own the current state and the RNG.
class Environment {
public:
    explicit Environment(EnvConfig config);

    const EnvConfig& config() const { return config_; }
    const MdpModel& model() const { return model_; }
    const RewardFunction& reward() const { return reward_; }
    Sense sense() const { return reward_.sense(); }
    int num_channels() const { return config_.num_channels(); }

    /// mu_j(s, a) per pair for channel j.
    PairValues mean_rewards(int channel) const;

    /// Draws all channel gains (fixed order) and then the arrival, so the
    /// stream position does not depend on the action or channel chosen.
    SlotOutcome step(int state, Action a, int channel, Rng& rng) const;

private:
    EnvConfig config_;
    MdpModel model_;
    RewardFunction reward_;
    std::vector<double> arrival_cdf_;
};

} // namespace ehmdp
