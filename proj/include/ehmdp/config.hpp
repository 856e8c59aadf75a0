#pragma once

#include "ehmdp/env.hpp"
#include "ehmdp/learners.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ehmdp {

enum class LearnerKind { Lpsm, EpochLpsm, McLpsm, Genie, Naive, Fixed };

std::string to_string(LearnerKind kind);

struct LearnerSpec {
    LearnerKind kind = LearnerKind::Lpsm;
    std::string label;
    int n0 = 2;
    int eta = 10;
    GrowthSpec growth = GrowthSpec::constant(300.0);
    std::vector<Action> policy;
};

struct ExperimentSpec {
    EnvConfig env;
    std::vector<LearnerSpec> learners;
    long horizon = 100;
    int runs = 1;
    std::uint64_t seed = 1;
    /// "", "regret_vs_t", "epoch_sweep" or "regret_over_log_t".
    std::string figure;
    /// Number of leading runs that get a per-slot event log.
    int event_log_runs = 0;
};

/// Parse errors throw Error("config").
EnvConfig parse_env(const nlohmann::json& j);
/// `base` resolves a relative "env_file".
ExperimentSpec parse_experiment(const nlohmann::json& j, const std::filesystem::path& base = {});

nlohmann::json read_json_file(const std::filesystem::path& path);

/// Loads either a bare environment or a full experiment; a bare environment
/// becomes an experiment with no learners.
ExperimentSpec load_spec(const std::filesystem::path& path);

/// Checks learner parameters against the environment (channel counts, n0, eta,
/// fixed policy validity). Throws Error("config").
void validate_spec(const ExperimentSpec& spec);

} // namespace ehmdp
