#include "ehmdp/learners.hpp"

#include "ehmdp/error.hpp"

#include <algorithm>
#include <cmath>

namespace ehmdp {

LearnerContext LearnerContext::from(const Environment& env) {
    return LearnerContext{&env.model(), env.reward(), env.num_channels()};
}

EstimateTable::EstimateTable(const LearnerContext& ctx, int channels)
    : model_(ctx.model), reward_(ctx.reward),
      indexing_(ctx.reward.state_dependent() ? Indexing::PerPair : Indexing::PerAction),
      cell_of_pair_(ctx.model->num_pairs()), counts_(channels, 0) {
    const auto& model = *model_;
    if (indexing_ == Indexing::PerPair) {
        for (int i = 0; i < model.num_pairs(); ++i) {
            cells_.push_back(model.pair(i));
            cell_of_pair_[i] = i;
        }
    } else {
        const auto& labels = model.action_labels();
        cells_.resize(labels.size(), StateAction{-1, 0});
        for (int i = 0; i < model.num_pairs(); ++i) {
            const auto& sa = model.pair(i);
            const int cell = static_cast<int>(
                std::lower_bound(labels.begin(), labels.end(), sa.action) - labels.begin());
            if (cells_[cell].state < 0) {
                cells_[cell] = sa;
            }
            cell_of_pair_[i] = cell;
        }
    }
    theta_.assign(channels, std::vector<double>(cells_.size(), 0.0));
}

void EstimateTable::observe(int channel, double gain) {
    auto& theta = theta_.at(channel);
    const double m = static_cast<double>(counts_[channel]);
    for (std::size_t c = 0; c < cells_.size(); ++c) {
        const double f = reward_(cells_[c].state, cells_[c].action, gain);
        theta[c] = (m * theta[c] + f) / (m + 1.0);
    }
    ++counts_[channel];
}

double EstimateTable::theta(int channel, int state, Action a) const {
    const auto k = model_->action_position(state, a);
    if (!k) {
        throw Error("invalid_argument", "no estimate for an invalid (state, action) pair");
    }
    return theta_.at(channel)[cell_of_pair(model_->pair_index(state, *k))];
}

PairValues EstimateTable::pair_values(int channel) const {
    const auto& theta = theta_.at(channel);
    PairValues out(model_->num_pairs());
    for (int i = 0; i < model_->num_pairs(); ++i) {
        out[i] = theta[cell_of_pair(i)];
    }
    return out;
}

double GrowthSpec::operator()(long t) const {
    switch (kind) {
    case Kind::Constant:
        return w;
    case Kind::LogLog:
        return w * std::max(1.0, std::log(std::log(static_cast<double>(t))));
    case Kind::Table:
        if (table.empty()) {
            throw Error("config", "growth table is empty");
        }
        return table[std::min<std::size_t>(static_cast<std::size_t>(t - 1), table.size() - 1)];
    }
    return w;
}

ExplorationSchedule::ExplorationSchedule(GrowthSpec growth, int channels, long horizon)
    : growth_(std::move(growth)), channels_(channels), horizon_(horizon),
      member_(horizon + 1, false), prefix_(horizon + 1, 0) {
    if (channels < 1) {
        throw Error("config", "exploration needs at least one channel");
    }
    if (growth_.kind != GrowthSpec::Kind::Table && !(growth_.w > 0.0)) {
        throw Error("config", "exploration constant w must be positive");
    }
    for (long t = 1; t <= horizon_; ++t) {
        bool include = t == 1;
        if (t > 1) {
            const double need = std::ceil(growth_(t) * std::log(static_cast<double>(t)));
            include = static_cast<double>(prefix_[t - 1]) < channels_ * need;
        }
        member_[t] = include;
        prefix_[t] = prefix_[t - 1] + (include ? 1 : 0);
    }
}

long ExplorationSchedule::count(long n) const {
    if (n <= 0) {
        return 0;
    }
    return prefix_[std::min(n, horizon_)];
}

Action smallest_action(const MdpModel& model, int state) {
    return model.actions(state)[0];
}

LpsmLearner::LpsmLearner(const LearnerContext& ctx, std::string name)
    : Learner(std::move(name)), ctx_(ctx), table_(ctx, 1) {
    if (ctx.channels != 1) {
        throw Error("config", this->name() + " is a single-channel learner");
    }
    channel_map_.assign(ctx.model->num_pairs(), 0);
}

void LpsmLearner::solve(long t) {
    try {
        policy_ = solve_policy(*ctx_.model, table_.pair_values(0), ctx_.sense());
    } catch (const Error& e) {
        throw Error(e.kind(), "slot " + std::to_string(t) + ": " + e.what());
    }
    ++lp_solves_;
}

Decision LpsmLearner::act(long t, int state) {
    Decision d;
    if (t == 0) {
        d.action = smallest_action(*ctx_.model, state);
        return d;
    }
    solve(t);
    d.lp_solved = true;
    d.action = (*policy_)(state);
    return d;
}

void LpsmLearner::observe(long, int, const Decision&, const SlotOutcome& outcome) {
    if (outcome.gain) {
        table_.observe(0, *outcome.gain);
    }
}

bool epoch_solve_slot(long t, int n0, int eta) {
    if (t < 1) {
        return false;
    }
    if (t < n0) {
        return true;
    }
    if (t % n0 != 0) {
        return false;
    }
    long q = t / n0;
    while (q % eta == 0) {
        q /= eta;
    }
    return q == 1;
}

long epoch_solve_count(long last_slot, int n0, int eta) {
    if (last_slot < 1) {
        return 0;
    }
    long count = std::min<long>(n0 - 1, last_slot);
    for (long start = n0; start <= last_slot; start *= eta) {
        ++count;
    }
    return count;
}

EpochLpsmLearner::EpochLpsmLearner(const LearnerContext& ctx, int n0, int eta, std::string name)
    : LpsmLearner(ctx, std::move(name)), n0_(n0), eta_(eta) {
    if (n0 < 1) {
        throw Error("config", "epoch_lpsm needs n0 >= 1");
    }
    if (eta < 2) {
        throw Error("config", "epoch_lpsm needs eta >= 2");
    }
}

Decision EpochLpsmLearner::act(long t, int state) {
    Decision d;
    if (t == 0) {
        d.action = smallest_action(*ctx_.model, state);
        return d;
    }
    if (epoch_solve_slot(t, n0_, eta_) || !policy_) {
        solve(t);
        d.lp_solved = true;
    }
    d.action = (*policy_)(state);
    return d;
}

McLpsmLearner::McLpsmLearner(const LearnerContext& ctx, ExplorationSchedule schedule,
                             std::string name)
    : Learner(std::move(name)), ctx_(ctx), schedule_(std::move(schedule)),
      table_(ctx, ctx.channels) {
    if (schedule_.channels() != ctx.channels) {
        throw Error("config", "exploration schedule built for a different channel count");
    }
}

Decision McLpsmLearner::act(long t, int state) {
    const long n = t + 1;
    Decision d;
    if (schedule_.contains(n)) {
        d.exploring = true;
        d.channel = static_cast<int>((n - 1) % ctx_.channels);
        d.action = smallest_action(*ctx_.model, state);
        return d;
    }
    if (resolve_ || !policy_) {
        const auto& model = *ctx_.model;
        std::vector<PairValues> theta(ctx_.channels);
        for (int j = 0; j < ctx_.channels; ++j) {
            theta[j] = table_.pair_values(j);
        }
        const bool maximize = ctx_.sense() == Sense::Maximize;
        channel_map_.assign(model.num_pairs(), 0);
        PairValues objective(model.num_pairs());
        for (int i = 0; i < model.num_pairs(); ++i) {
            int best = 0;
            for (int j = 1; j < ctx_.channels; ++j) {
                if (maximize ? theta[j][i] > theta[best][i] : theta[j][i] < theta[best][i]) {
                    best = j;
                }
            }
            channel_map_[i] = best;
            objective[i] = theta[best][i];
        }
        try {
            policy_ = solve_policy(model, objective, ctx_.sense());
        } catch (const Error& e) {
            throw Error(e.kind(), "slot " + std::to_string(t) + ": " + e.what());
        }
        ++lp_solves_;
        resolve_ = false;
        d.lp_solved = true;
    }
    d.action = (*policy_)(state);
    d.channel = channel_map_[ctx_.model->pair_index(state, *ctx_.model->action_position(state, d.action))];
    return d;
}

void McLpsmLearner::observe(long, int, const Decision& decision, const SlotOutcome& outcome) {
    if (!decision.exploring) {
        return;
    }
    resolve_ = true;
    if (outcome.gain) {
        table_.observe(decision.channel, *outcome.gain);
    }
}

std::vector<int> McLpsmLearner::action_channel_map() const {
    const auto& model = *ctx_.model;
    std::vector<int> out;
    if (channel_map_.empty()) {
        return out;
    }
    for (Action a : model.action_labels()) {
        for (int i = 0; i < model.num_pairs(); ++i) {
            if (model.pair(i).action == a) {
                out.push_back(channel_map_[i]);
                break;
            }
        }
    }
    return out;
}

FixedPolicyLearner::FixedPolicyLearner(const MdpModel& model, std::string name,
                                       DeterministicPolicy policy, std::vector<int> channel_of_pair)
    : Learner(std::move(name)), model_(&model) {
    if (static_cast<int>(channel_of_pair.size()) != model.num_pairs()) {
        throw Error("invalid_argument", "channel map must cover every (state, action) pair");
    }
    policy_ = std::move(policy);
    channel_map_ = std::move(channel_of_pair);
}

Decision FixedPolicyLearner::act(long, int state) {
    Decision d;
    d.action = (*policy_)(state);
    d.channel = channel_map_[model_->pair_index(state, *model_->action_position(state, d.action))];
    return d;
}

GenieSolution solve_genie(const Environment& env) {
    const auto& model = env.model();
    const bool maximize = env.sense() == Sense::Maximize;
    std::vector<PairValues> means(env.num_channels());
    for (int j = 0; j < env.num_channels(); ++j) {
        means[j] = env.mean_rewards(j);
    }
    std::vector<int> channel(model.num_pairs(), 0);
    PairValues best(model.num_pairs());
    for (int i = 0; i < model.num_pairs(); ++i) {
        int b = 0;
        for (int j = 1; j < env.num_channels(); ++j) {
            if (maximize ? means[j][i] > means[b][i] : means[j][i] < means[b][i]) {
                b = j;
            }
        }
        channel[i] = b;
        best[i] = means[b][i];
    }
    auto policy = solve_policy(model, best, env.sense());
    const double rho = average_reward(model, policy, best);
    return GenieSolution{std::move(policy), std::move(channel), std::move(best), rho};
}

DeterministicPolicy naive_policy(const MdpModel& model) {
    std::vector<Action> acts(model.num_states());
    for (int s = 0; s < model.num_states(); ++s) {
        const auto choices = model.actions(s);
        acts[s] = *std::max_element(choices.begin(), choices.end());
    }
    return DeterministicPolicy(model, std::move(acts));
}

std::unique_ptr<Learner> make_baseline(BaselineKind kind, const Environment& env,
                                       const GenieSolution& genie,
                                       const std::optional<DeterministicPolicy>& fixed,
                                       std::string name) {
    switch (kind) {
    case BaselineKind::Genie:
        return std::make_unique<FixedPolicyLearner>(env.model(), name.empty() ? "genie" : name, genie.policy,
                                                    genie.channel_of_pair);
    case BaselineKind::Naive:
        return std::make_unique<FixedPolicyLearner>(env.model(), name.empty() ? "naive" : name,
                                                    naive_policy(env.model()), genie.channel_of_pair);
    case BaselineKind::Fixed:
        if (!fixed) {
            throw Error("config", "fixed baseline needs a policy");
        }
        return std::make_unique<FixedPolicyLearner>(env.model(), name.empty() ? "fixed" : name, *fixed,
                                                    genie.channel_of_pair);
    }
    throw Error("config", "unknown baseline");
}

} // namespace ehmdp
