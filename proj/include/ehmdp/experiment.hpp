#pragma once

#include "ehmdp/analysis.hpp"
#include "ehmdp/config.hpp"
#include "ehmdp/learners.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ehmdp {

struct LearnerResult {
    LearnerSpec spec;
    /// R(t) for t = 1..T.
    TraceStats stats;
    /// Per run, in run order.
    std::vector<long> lp_solves;
    std::vector<long> explorations;
    /// Last slot whose decision rule differed from the genie's (-1 if none).
    std::vector<long> last_nonoptimal;
    std::vector<bool> final_optimal;
    /// Per-run traces; filled only with RunOptions::keep_traces.
    std::vector<std::vector<double>> traces;
    /// NDJSON text per logged run.
    std::vector<std::string> event_logs;
    /// Exact prescribed count (single-channel learners) or the |R(T)| ceiling.
    std::optional<long> expected_lp_solves;
    std::optional<long> lp_solve_ceiling;
};

struct AggregateResult {
    std::vector<Action> genie_policy;
    std::vector<int> genie_channels;
    double rho_star = 0.0;
    Sense sense = Sense::Maximize;
    long horizon = 0;
    int runs = 0;
    int threads = 1;
    double wall_seconds = 0.0;
    std::vector<LearnerResult> learners;
};

struct RunOptions {
    bool keep_traces = false;
    /// 0: HARVEST_MDP_THREADS if set, else the hardware concurrency.
    int threads = 0;
};

int worker_count(int requested, int runs);

/// Runs every learner of the spec on the same per-run random stream. Results
/// do not depend on the number of workers.
AggregateResult run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

/// Constants, bound values, minimal w and warnings for the spec's environment
/// and learners.
nlohmann::json bounds_report(const ExperimentSpec& spec);

/// Writes aggregate.csv, solves.csv, summary.json, bounds.json, the figure
/// file if the spec names one, and events/ when logs were requested.
void emit_outputs(const AggregateResult& result, const ExperimentSpec& spec,
                  const std::filesystem::path& out_dir);

void write_aggregate_csv(std::ostream& os, const AggregateResult& result);

} // namespace ehmdp
