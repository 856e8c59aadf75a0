#pragma once

#include "ehmdp/mdp.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ehmdp {

enum class Sense { Maximize, Minimize };

/// Equality-form LP: optimize objective . x subject to rows x = rhs, x >= 0.
struct LpProblem {
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    Sense sense = Sense::Maximize;
    std::vector<std::string> variable_names;

    int num_variables() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }
};

struct SimplexOptions {
    double feasibility_tol = 1e-8;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-11;
    int max_iterations = 100'000;
};

struct LpSolution {
    std::vector<double> x;
    double objective = 0.0;
    int iterations = 0;
};

/// Dense two-phase primal simplex with Bland's rule. Redundant equality rows
/// are detected after phase 1 and removed. Throws Error("lp_infeasible") or
/// Error("lp_unbounded").
LpSolution simplex_solve(const LpProblem& problem, const SimplexOptions& options = {});

/// Occupancy-measure LP over the model's (s, a) pairs: the normalization row
/// followed by one flow-balance row per state (S + 1 rows in total).
LpProblem build_average_reward_lp(const MdpModel& model, std::span<const double> mean_rewards,
                                  Sense sense);

/// pi(s, a) per valid pair, in MdpModel::pair_index order.
struct OccupancyMeasure {
    PairValues pi_sa;
    double objective = 0.0;
};

/// Builds the occupancy LP, drops the last (redundant) balance row, solves it
/// and re-substitutes the solution into every constraint of the full LP.
OccupancyMeasure solve_occupancy(const MdpModel& model, std::span<const double> mean_rewards,
                                 Sense sense, const SimplexOptions& options = {});

/// Per state, the action with the largest occupancy. States with total mass
/// below 1e-9 and exact ties resolve to the smallest action position.
DeterministicPolicy extract_policy(const OccupancyMeasure& occupancy, const MdpModel& model);

/// Convenience: extract_policy(solve_occupancy(...)).
DeterministicPolicy solve_policy(const MdpModel& model, std::span<const double> mean_rewards,
                                 Sense sense);

/// Human-readable fixed-format dump (variables, objective row, constraint rows).
void write_lp(std::ostream& os, const LpProblem& problem);

} // namespace ehmdp
