#include "ehmdp/env.hpp"

#include "ehmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ehmdp {

namespace {

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int sample_index(const std::vector<double>& cdf, Rng& rng) {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                     static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

std::vector<double> cumulative(const std::vector<double>& probs) {
    std::vector<double> cdf(probs.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        cdf[k] = acc;
    }
    return cdf;
}

MdpModel build_model(const EnvConfig& config) {
    if (config.q_max < 1) {
        throw Error("config", "q_max must be at least 1");
    }
    if (config.channels.empty()) {
        throw Error("config", "at least one channel is required");
    }
    if (!(config.bandwidth > 0.0)) {
        throw Error("config", "bandwidth must be positive");
    }
    if (config.mode == Mode::PacketScheduling &&
        !(config.weights.delay > 0.0 && config.weights.power > 0.0)) {
        throw Error("config", "packet mode needs positive delay and power weights");
    }
    if (config.initial_state < 0 || config.initial_state > config.q_max) {
        throw Error("config", "initial state outside 0..q_max");
    }
    auto actions = config.actions;
    if (actions.empty()) {
        actions = config.mode == Mode::EnergyHarvesting ? transmit_action_sets(config.q_max)
                                                        : packet_action_sets(config.q_max);
    }
    return build_transitions(config.arrivals, config.q_max, std::move(actions),
                             config.mode == Mode::EnergyHarvesting ? RewardKind::Rate
                                                                   : RewardKind::Cost);
}

} // namespace

Rng make_run_rng(std::uint64_t master_seed, std::uint64_t run_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(run_index),
                      static_cast<std::uint32_t>(run_index >> 32), 0x9e3779b9u};
    return Rng(seq);
}

DiscreteChannel::DiscreteChannel(std::vector<double> support, std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
    if (support_.empty() || support_.size() != probs_.size()) {
        throw Error("invalid_argument", "channel support and probabilities must match in length");
    }
    for (std::size_t k = 0; k < support_.size(); ++k) {
        if (!(support_[k] >= 0.0) || !std::isfinite(support_[k])) {
            throw Error("invalid_argument", "channel gains must be finite and non-negative");
        }
        if (k > 0 && !(support_[k] > support_[k - 1])) {
            throw Error("invalid_argument", "channel support must be sorted and distinct");
        }
    }
    HarvestDistribution check(probs_);
    cdf_ = cumulative(probs_);
}

DiscreteChannel DiscreteChannel::scaled_bernoulli(double gain, double p) {
    if (gain == 0.0) {
        return deterministic(0.0);
    }
    return DiscreteChannel({0.0, gain}, {1.0 - p, p});
}

DiscreteChannel DiscreteChannel::deterministic(double gain) {
    return DiscreteChannel({gain}, {1.0});
}

double DiscreteChannel::mean_gain() const {
    double m = 0.0;
    for (std::size_t k = 0; k < support_.size(); ++k) {
        m += probs_[k] * support_[k];
    }
    return m;
}

double DiscreteChannel::sample(Rng& rng) const {
    return support_[sample_index(cdf_, rng)];
}

double rate(Action a, double gain, double bandwidth) {
    return bandwidth * std::log1p(a * gain) / std::numbers::ln2;
}

std::optional<double> invert_rate(Action a, double observed_rate, double bandwidth) {
    if (a <= 0) {
        return std::nullopt;
    }
    return std::expm1(observed_rate / bandwidth * std::numbers::ln2) / a;
}

double mean_rate(Action a, const DiscreteChannel& channel, double bandwidth) {
    double m = 0.0;
    for (std::size_t k = 0; k < channel.support().size(); ++k) {
        m += channel.probs()[k] * rate(a, channel.support()[k], bandwidth);
    }
    return m;
}

double packet_cost(int queue, Action sent, double gain, const CostWeights& weights,
                   double bandwidth) {
    return weights.delay * (queue - sent) + weights.power * gain * std::exp2(sent / bandwidth);
}

double RewardFunction::operator()(int state, Action a, double gain) const {
    if (mode == Mode::EnergyHarvesting) {
        return rate(a, gain, bandwidth);
    }
    return packet_cost(state, a, gain, weights, bandwidth);
}

std::optional<double> RewardFunction::invert(int state, Action a, double observed) const {
    if (mode == Mode::EnergyHarvesting) {
        return invert_rate(a, observed, bandwidth);
    }
    return (observed - weights.delay * (state - a)) / (weights.power * std::exp2(a / bandwidth));
}

Environment::Environment(EnvConfig config)
    : config_(std::move(config)), model_(build_model(config_)),
      reward_{config_.mode, config_.bandwidth, config_.weights},
      arrival_cdf_(cumulative(config_.arrivals.probs())) {}

PairValues Environment::mean_rewards(int channel) const {
    const auto& ch = config_.channels.at(channel);
    return tabulate(model_, [&](int s, Action a) {
        double m = 0.0;
        for (std::size_t k = 0; k < ch.support().size(); ++k) {
            m += ch.probs()[k] * reward_(s, a, ch.support()[k]);
        }
        return m;
    });
}

SlotOutcome Environment::step(int state, Action a, int channel, Rng& rng) const {
    if (!model_.is_valid(state, a)) {
        throw Error("invalid_argument", "action " + std::to_string(a) + " is not allowed in state " +
                                            std::to_string(state));
    }
    if (channel < 0 || channel >= num_channels()) {
        throw Error("invalid_argument", "channel index out of range");
    }
    double gain = 0.0;
    for (int j = 0; j < num_channels(); ++j) {
        const double x = config_.channels[j].sample(rng);
        if (j == channel) {
            gain = x;
        }
    }
    const int arrival = sample_index(arrival_cdf_, rng);

    SlotOutcome out;
    out.channel = channel;
    out.value = reward_(state, a, gain);
    out.next_state = std::min(state - a + arrival, config_.q_max);
    if (config_.observation == GainObservation::Oracle) {
        out.gain = gain;
    } else {
        out.gain = reward_.invert(state, a, out.value);
    }
    return out;
}

} // namespace ehmdp
