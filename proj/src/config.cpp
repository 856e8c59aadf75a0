#include "ehmdp/config.hpp"

#include "ehmdp/error.hpp"

#include <fstream>
#include <set>

namespace ehmdp {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw Error("config", "unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error("config", where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
    if (!j.contains(key)) {
        return fallback;
    }
    return get<T>(j, key, where);
}

HarvestDistribution parse_distribution(const json& j, const std::string& where) {
    if (j.is_array()) {
        return HarvestDistribution(j.get<std::vector<double>>());
    }
    if (j.is_object()) {
        reject_unknown(j, {"uniform", "point_mass"}, where);
        if (j.contains("uniform")) {
            return HarvestDistribution::uniform(get<int>(j, "uniform", where));
        }
        if (j.contains("point_mass")) {
            return HarvestDistribution::point_mass(get<int>(j, "point_mass", where));
        }
    }
    throw Error("config", where + " must be a probability list or {\"uniform\": K}");
}

DiscreteChannel parse_channel(const json& j, const std::string& where) {
    if (!j.is_object()) {
        throw Error("config", where + " must be an object");
    }
    if (j.contains("bernoulli")) {
        reject_unknown(j, {"bernoulli"}, where);
        const auto& b = j.at("bernoulli");
        reject_unknown(b, {"gain", "p"}, where + ".bernoulli");
        return DiscreteChannel::scaled_bernoulli(get<double>(b, "gain", where),
                                                 get<double>(b, "p", where));
    }
    reject_unknown(j, {"support", "probs"}, where);
    return DiscreteChannel(get<std::vector<double>>(j, "support", where),
                           get<std::vector<double>>(j, "probs", where));
}

LearnerSpec parse_learner(const json& j, const std::string& where) {
    LearnerSpec spec;
    const auto kind = get<std::string>(j, "kind", where);
    if (kind == "lpsm") {
        spec.kind = LearnerKind::Lpsm;
        reject_unknown(j, {"kind", "label"}, where);
    } else if (kind == "epoch_lpsm") {
        spec.kind = LearnerKind::EpochLpsm;
        reject_unknown(j, {"kind", "label", "n0", "eta"}, where);
        spec.n0 = get<int>(j, "n0", where);
        spec.eta = get<int>(j, "eta", where);
    } else if (kind == "mc_lpsm") {
        spec.kind = LearnerKind::McLpsm;
        reject_unknown(j, {"kind", "label", "w", "growth"}, where);
        const bool table = j.contains("growth") && j.at("growth").is_array();
        const std::string g = table ? "table" : get_or<std::string>(j, "growth", "constant", where);
        if (table) {
            spec.growth = GrowthSpec{GrowthSpec::Kind::Table, 1.0, get<std::vector<double>>(j, "growth", where)};
        } else if (g == "constant") {
            spec.growth = GrowthSpec::constant(get<double>(j, "w", where));
        } else if (g == "loglog") {
            spec.growth = GrowthSpec{GrowthSpec::Kind::LogLog, get<double>(j, "w", where), {}};
        } else {
            throw Error("config", where + ".growth must be \"constant\", \"loglog\" or a table");
        }
    } else if (kind == "genie") {
        spec.kind = LearnerKind::Genie;
        reject_unknown(j, {"kind", "label"}, where);
    } else if (kind == "naive") {
        spec.kind = LearnerKind::Naive;
        reject_unknown(j, {"kind", "label"}, where);
    } else if (kind == "fixed") {
        spec.kind = LearnerKind::Fixed;
        reject_unknown(j, {"kind", "label", "policy"}, where);
        spec.policy = get<std::vector<Action>>(j, "policy", where);
    } else {
        throw Error("config", where + ": unknown learner kind '" + kind + "'");
    }
    spec.label = get_or<std::string>(j, "label", to_string(spec.kind), where);
    return spec;
}

} // namespace

std::string to_string(LearnerKind kind) {
    switch (kind) {
    case LearnerKind::Lpsm:
        return "lpsm";
    case LearnerKind::EpochLpsm:
        return "epoch_lpsm";
    case LearnerKind::McLpsm:
        return "mc_lpsm";
    case LearnerKind::Genie:
        return "genie";
    case LearnerKind::Naive:
        return "naive";
    case LearnerKind::Fixed:
        return "fixed";
    }
    return "unknown";
}

EnvConfig parse_env(const json& j) {
    const std::string where = "env";
    if (!j.is_object()) {
        throw Error("config", "env must be an object");
    }
    reject_unknown(j, {"mode", "q_max", "bandwidth", "harvest", "arrivals", "actions", "channels",
                       "cost_weights", "gain_observation", "initial_state"},
                   where);
    EnvConfig cfg;
    const auto mode = get_or<std::string>(j, "mode", "energy_harvesting", where);
    if (mode == "energy_harvesting") {
        cfg.mode = Mode::EnergyHarvesting;
    } else if (mode == "packet_scheduling") {
        cfg.mode = Mode::PacketScheduling;
    } else {
        throw Error("config", "env.mode must be energy_harvesting or packet_scheduling");
    }
    cfg.q_max = get_or<int>(j, "q_max", cfg.q_max, where);
    cfg.bandwidth = get_or<double>(j, "bandwidth", cfg.bandwidth, where);
    if (j.contains("harvest") && j.contains("arrivals")) {
        throw Error("config", "env has both harvest and arrivals");
    }
    if (j.contains("harvest")) {
        cfg.arrivals = parse_distribution(j.at("harvest"), "env.harvest");
    } else if (j.contains("arrivals")) {
        cfg.arrivals = parse_distribution(j.at("arrivals"), "env.arrivals");
    } else {
        cfg.arrivals = HarvestDistribution::uniform(cfg.q_max);
    }
    if (j.contains("actions")) {
        cfg.actions = get<std::vector<std::vector<Action>>>(j, "actions", where);
    }
    if (j.contains("channels")) {
        const auto& arr = j.at("channels");
        if (!arr.is_array() || arr.empty()) {
            throw Error("config", "env.channels must be a non-empty list");
        }
        cfg.channels.clear();
        for (std::size_t k = 0; k < arr.size(); ++k) {
            cfg.channels.push_back(parse_channel(arr[k], "env.channels[" + std::to_string(k) + "]"));
        }
    }
    if (j.contains("cost_weights")) {
        const auto& w = j.at("cost_weights");
        reject_unknown(w, {"delay", "power"}, "env.cost_weights");
        cfg.weights.delay = get_or<double>(w, "delay", cfg.weights.delay, "env.cost_weights");
        cfg.weights.power = get_or<double>(w, "power", cfg.weights.power, "env.cost_weights");
    }
    const auto obs = get_or<std::string>(j, "gain_observation", "oracle", where);
    if (obs == "oracle") {
        cfg.observation = GainObservation::Oracle;
    } else if (obs == "realistic") {
        cfg.observation = GainObservation::Realistic;
    } else {
        throw Error("config", "env.gain_observation must be oracle or realistic");
    }
    cfg.initial_state = get_or<int>(j, "initial_state", cfg.initial_state, where);
    return cfg;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("config", "cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("config", path.string() + ": " + e.what());
    }
}

ExperimentSpec parse_experiment(const json& j, const std::filesystem::path& base) {
    const std::string where = "experiment";
    reject_unknown(j, {"env", "env_file", "learners", "horizon", "runs", "seed", "figure", "event_logs"},
                   where);
    ExperimentSpec spec;
    if (j.contains("env") && j.contains("env_file")) {
        throw Error("config", "experiment has both env and env_file");
    }
    if (j.contains("env")) {
        spec.env = parse_env(j.at("env"));
    } else if (j.contains("env_file")) {
        auto path = std::filesystem::path(get<std::string>(j, "env_file", where));
        if (path.is_relative()) {
            path = base / path;
        }
        spec.env = parse_env(read_json_file(path));
    }
    if (j.contains("learners")) {
        const auto& arr = j.at("learners");
        if (!arr.is_array()) {
            throw Error("config", "experiment.learners must be a list");
        }
        for (std::size_t k = 0; k < arr.size(); ++k) {
            spec.learners.push_back(parse_learner(arr[k], "learners[" + std::to_string(k) + "]"));
        }
    }
    spec.horizon = get_or<long>(j, "horizon", spec.horizon, where);
    spec.runs = get_or<int>(j, "runs", spec.runs, where);
    spec.seed = get_or<std::uint64_t>(j, "seed", spec.seed, where);
    spec.figure = get_or<std::string>(j, "figure", "", where);
    spec.event_log_runs = get_or<int>(j, "event_logs", 0, where);
    return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
    const json j = read_json_file(path);
    if (!j.is_object()) {
        throw Error("config", path.string() + ": top level must be an object");
    }
    if (j.contains("env") || j.contains("env_file") || j.contains("learners")) {
        return parse_experiment(j, path.parent_path());
    }
    ExperimentSpec spec;
    spec.env = parse_env(j);
    return spec;
}

void validate_spec(const ExperimentSpec& spec) {
    if (spec.horizon < 1) {
        throw Error("config", "horizon must be at least 1");
    }
    if (spec.runs < 1) {
        throw Error("config", "runs must be at least 1");
    }
    if (spec.event_log_runs < 0) {
        throw Error("config", "event_logs must be non-negative");
    }
    if (!spec.figure.empty() && spec.figure != "regret_vs_t" && spec.figure != "epoch_sweep" &&
        spec.figure != "regret_over_log_t") {
        throw Error("config", "figure must be regret_vs_t, epoch_sweep or regret_over_log_t");
    }
    const Environment env(spec.env);
    std::set<std::string> labels;
    for (const auto& l : spec.learners) {
        if (!labels.insert(l.label).second) {
            throw Error("config", "duplicate learner label '" + l.label + "'");
        }
        if (l.label.find_first_of(",\"\n") != std::string::npos) {
            throw Error("config", "learner label '" + l.label + "' contains a comma, quote or newline");
        }
        switch (l.kind) {
        case LearnerKind::Lpsm:
        case LearnerKind::EpochLpsm:
            if (env.num_channels() != 1) {
                throw Error("config", l.label + " needs exactly one channel");
            }
            if (l.kind == LearnerKind::EpochLpsm && (l.n0 < 1 || l.eta < 2)) {
                throw Error("config", l.label + " needs n0 >= 1 and eta >= 2");
            }
            break;
        case LearnerKind::McLpsm:
            if (l.growth.kind == GrowthSpec::Kind::Table ? l.growth.table.empty() : !(l.growth.w > 0.0)) {
                throw Error("config", l.label + " needs w > 0 or a non-empty growth table");
            }
            break;
        case LearnerKind::Fixed:
            try {
                DeterministicPolicy(env.model(), l.policy);
            } catch (const Error& e) {
                throw Error("config", l.label + ": " + e.what());
            }
            break;
        case LearnerKind::Genie:
        case LearnerKind::Naive:
            break;
        }
    }
}

} // namespace ehmdp
