#include "ehmdp/lp.hpp"

#include "ehmdp/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace ehmdp {

namespace {

// Dense tableau. Row i < m holds constraint i (basis variable basis[i]); the
// last row holds reduced costs with the negated objective value in the rhs
// column. Columns [0, n) are structural, [n, n + m) artificial, n + m is rhs.
class Tableau {
public:
    Tableau(const LpProblem& lp, const SimplexOptions& opt)
        : m_(lp.num_rows()), n_(lp.num_variables()), width_(n_ + m_ + 1), opt_(opt),
          cells_(static_cast<std::size_t>(m_ + 1) * width_, 0.0), basis_(m_), active_(m_, true) {
        for (int i = 0; i < m_; ++i) {
            const double sign = lp.rhs[i] < 0.0 ? -1.0 : 1.0;
            for (int j = 0; j < n_; ++j) {
                at(i, j) = sign * lp.rows[i][j];
            }
            at(i, n_ + i) = 1.0;
            at(i, rhs_col()) = sign * lp.rhs[i];
            basis_[i] = n_ + i;
        }
    }

    void run_phase_one() {
        // minimize the sum of artificials
        for (int j = 0; j < width_; ++j) {
            at(m_, j) = 0.0;
        }
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; j < n_; ++j) {
                at(m_, j) -= at(i, j);
            }
            at(m_, rhs_col()) -= at(i, rhs_col());
        }
        iterate(n_ + m_);
        if (-at(m_, rhs_col()) > opt_.feasibility_tol) {
            throw Error("lp_infeasible", "phase 1 optimum is positive; constraints are inconsistent");
        }
        expel_artificials();
    }

    void run_phase_two(const std::vector<double>& costs) {
        for (int j = 0; j < width_; ++j) {
            at(m_, j) = 0.0;
        }
        for (int j = 0; j < n_; ++j) {
            at(m_, j) = costs[j];
        }
        for (int i = 0; i < m_; ++i) {
            if (!active_[i]) {
                continue;
            }
            const double cb = costs[basis_[i]];
            if (cb == 0.0) {
                continue;
            }
            for (int j = 0; j < width_; ++j) {
                at(m_, j) -= cb * at(i, j);
            }
        }
        iterate(n_);
    }

    std::vector<double> solution() const {
        std::vector<double> x(n_, 0.0);
        for (int i = 0; i < m_; ++i) {
            if (active_[i] && basis_[i] < n_) {
                x[basis_[i]] = at(i, rhs_col());
            }
        }
        return x;
    }

    int iterations() const { return iterations_; }

private:
    double& at(int i, int j) { return cells_[static_cast<std::size_t>(i) * width_ + j]; }
    double at(int i, int j) const { return cells_[static_cast<std::size_t>(i) * width_ + j]; }
    int rhs_col() const { return width_ - 1; }

    // Bland's rule: smallest eligible entering column, and among ratio ties the
    // row whose basic variable has the smallest index.
    void iterate(int eligible_columns) {
        for (;;) {
            int enter = -1;
            for (int j = 0; j < eligible_columns; ++j) {
                if (at(m_, j) < -opt_.optimality_tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) {
                return;
            }
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i) {
                if (!active_[i]) {
                    continue;
                }
                const double a = at(i, enter);
                if (a <= opt_.pivot_tol) {
                    continue;
                }
                const double ratio = at(i, rhs_col()) / a;
                if (leave < 0 || ratio < best - 1e-12) {
                    best = ratio;
                    leave = i;
                } else if (ratio <= best + 1e-12 && basis_[i] < basis_[leave]) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0) {
                throw Error("lp_unbounded", "objective is unbounded on the feasible set");
            }
            pivot(leave, enter);
            if (++iterations_ > opt_.max_iterations) {
                throw Error("lp_iteration_limit", "simplex exceeded its iteration limit");
            }
        }
    }

    void pivot(int r, int c) {
        const double inv = 1.0 / at(r, c);
        for (int j = 0; j < width_; ++j) {
            at(r, j) *= inv;
        }
        at(r, c) = 1.0;
        for (int i = 0; i <= m_; ++i) {
            if (i == r || (i < m_ && !active_[i])) {
                continue;
            }
            const double f = at(i, c);
            if (f == 0.0) {
                continue;
            }
            for (int j = 0; j < width_; ++j) {
                at(i, j) -= f * at(r, j);
            }
            at(i, c) = 0.0;
        }
        basis_[r] = c;
    }

    // After phase 1 every artificial still basic sits at level zero. Pivot it
    // out on any structural column; if the row has none, it is redundant.
    void expel_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (!active_[i] || basis_[i] < n_) {
                continue;
            }
            int col = -1;
            for (int j = 0; j < n_; ++j) {
                if (std::abs(at(i, j)) > opt_.pivot_tol) {
                    col = j;
                    break;
                }
            }
            if (col < 0) {
                active_[i] = false;
            } else {
                pivot(i, col);
            }
        }
    }

    int m_;
    int n_;
    int width_;
    SimplexOptions opt_;
    std::vector<double> cells_;
    std::vector<int> basis_;
    std::vector<bool> active_;
    int iterations_ = 0;
};

} // namespace

LpSolution simplex_solve(const LpProblem& problem, const SimplexOptions& options) {
    const int n = problem.num_variables();
    if (static_cast<int>(problem.rhs.size()) != problem.num_rows()) {
        throw Error("invalid_argument", "rhs length differs from the row count");
    }
    for (const auto& row : problem.rows) {
        if (static_cast<int>(row.size()) != n) {
            throw Error("invalid_argument", "constraint row length differs from variable count");
        }
    }
    std::vector<double> costs(problem.objective);
    if (problem.sense == Sense::Maximize) {
        for (double& c : costs) {
            c = -c;
        }
    }
    Tableau tableau(problem, options);
    tableau.run_phase_one();
    tableau.run_phase_two(costs);

    LpSolution out;
    out.x = tableau.solution();
    out.iterations = tableau.iterations();
    for (int j = 0; j < n; ++j) {
        out.objective += problem.objective[j] * out.x[j];
    }
    return out;
}

LpProblem build_average_reward_lp(const MdpModel& model, std::span<const double> mean_rewards,
                                  Sense sense) {
    const int pairs = model.num_pairs();
    const int states = model.num_states();
    if (static_cast<int>(mean_rewards.size()) != pairs) {
        throw Error("invalid_argument", "reward table does not match the model");
    }
    LpProblem lp;
    lp.sense = sense;
    lp.objective.assign(mean_rewards.begin(), mean_rewards.end());
    lp.variable_names.reserve(pairs);
    for (int i = 0; i < pairs; ++i) {
        const auto& sa = model.pair(i);
        lp.variable_names.push_back("pi_" + std::to_string(sa.state) + "_" +
                                    std::to_string(sa.action));
    }
    lp.rows.emplace_back(pairs, 1.0);
    lp.rhs.push_back(1.0);
    for (int next = 0; next < states; ++next) {
        std::vector<double> row(pairs, 0.0);
        for (int i = 0; i < pairs; ++i) {
            if (model.pair(i).state == next) {
                row[i] += 1.0;
            }
            row[i] -= model.prob(i, next);
        }
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(0.0);
    }
    return lp;
}

OccupancyMeasure solve_occupancy(const MdpModel& model, std::span<const double> mean_rewards,
                                 Sense sense, const SimplexOptions& options) {
    const LpProblem full = build_average_reward_lp(model, mean_rewards, sense);
    LpProblem reduced = full;
    reduced.rows.pop_back();
    reduced.rhs.pop_back();

    const LpSolution sol = simplex_solve(reduced, options);

    for (int r = 0; r < full.num_rows(); ++r) {
        double lhs = 0.0;
        for (int j = 0; j < full.num_variables(); ++j) {
            lhs += full.rows[r][j] * sol.x[j];
        }
        if (std::abs(lhs - full.rhs[r]) > options.feasibility_tol) {
            throw Error("lp_numerical", "occupancy solution violates constraint row " +
                                            std::to_string(r));
        }
    }
    OccupancyMeasure out;
    out.pi_sa = sol.x;
    for (double& v : out.pi_sa) {
        if (v < -1e-9) {
            throw Error("lp_numerical", "occupancy solution has a negative entry");
        }
        v = std::max(v, 0.0);
    }
    out.objective = sol.objective;
    return out;
}

DeterministicPolicy extract_policy(const OccupancyMeasure& occupancy, const MdpModel& model) {
    std::vector<Action> acts(model.num_states());
    for (int s = 0; s < model.num_states(); ++s) {
        const auto choices = model.actions(s);
        const int begin = model.pair_begin(s);
        double total = 0.0;
        int best = 0;
        for (int k = 0; k < static_cast<int>(choices.size()); ++k) {
            const double mass = occupancy.pi_sa[begin + k];
            total += mass;
            if (mass > occupancy.pi_sa[begin + best]) {
                best = k;
            }
        }
        acts[s] = choices[total < 1e-9 ? 0 : best];
    }
    return DeterministicPolicy(model, std::move(acts));
}

DeterministicPolicy solve_policy(const MdpModel& model, std::span<const double> mean_rewards,
                                 Sense sense) {
    return extract_policy(solve_occupancy(model, mean_rewards, sense), model);
}

void write_lp(std::ostream& os, const LpProblem& problem) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << std::setprecision(17);
    os << (problem.sense == Sense::Maximize ? "MAXIMIZE" : "MINIMIZE") << "\n";
    os << "VARIABLES " << problem.num_variables() << "\n";
    for (int j = 0; j < problem.num_variables(); ++j) {
        os << "  " << j << " "
           << (j < static_cast<int>(problem.variable_names.size()) ? problem.variable_names[j]
                                                                   : "x" + std::to_string(j))
           << " >= 0\n";
    }
    os << "OBJECTIVE";
    for (double c : problem.objective) {
        os << " " << c;
    }
    os << "\nCONSTRAINTS " << problem.num_rows() << "\n";
    for (int i = 0; i < problem.num_rows(); ++i) {
        os << "  ";
        for (double a : problem.rows[i]) {
            os << a << " ";
        }
        os << "= " << problem.rhs[i] << "\n";
    }
    os << "END\n";
    os.flags(flags);
    os.precision(precision);
}

} // namespace ehmdp
