#pragma once

#include "gbsde/diagnostics.hpp"
#include "gbsde/model.hpp"
#include "gbsde/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gbsde {

/// One rung of the penalization ladder: the G-BSDE with driver f - n (y - S)^+.
struct PenalizedSolution {
    double n = 0.0;
    Grid grid;
    GBsdeSolution solution;
    /// dL_{i,j} = -n dt (Y_{i,j} - S(t_i, x_j))^+ <= 0, rows 0..n-1 (row n is zero).
    LatticeSurface L_increments;
    /// max over all nodes of (Y - S)^+.
    double sup_excess = 0.0;
    /// sup over volatility controls of E|L_T|.
    double L_T_norm = 0.0;
    /// sup over volatility controls of the expected accumulated defect, i.e. E|K_T|.
    double K_T_norm = 0.0;
};

struct LadderRow {
    double n = 0.0;
    double sup_excess = 0.0;
    double L_T_norm = 0.0;
    double K_T_norm = 0.0;
    double var_A = 0.0;
    /// sup |Y^n - Y^{next n}|; NaN for the last row.
    double cauchy_gap = 0.0;
    double max_abs_Y = 0.0;
};

enum class SlopeStatus { Fitted, Exact, Undefined };

struct PenalizationReport {
    std::vector<LadderRow> rows;
    std::optional<double> slope;
    SlopeStatus slope_status = SlopeStatus::Undefined;
    Grid grid;
    bool converged = false;
    double martingale_defect = 0.0;
    double skorokhod_residual = 0.0;
};

struct ReflectedOptions {
    std::vector<double> n_schedule{4, 8, 16, 32, 64, 128, 256, 512};
    double tol = 1e-3;
    SolveOptions solve;
};

/**
 * Limit triple (Y, Z, A) of the penalization ladder.
 *
 * Y = min(Y^n, S) for the last rung; A is the per-node backward residual of
 * the clipped Y; A = A1 - A2 with A2 increments n dt (Y^n - S)^+ from the
 * last rung.
 */
struct ReflectedSolution {
    ProblemSpec spec;  ///< problem on the (possibly refined) grid actually used
    double n_final = 0.0;
    double sup_excess_final = 0.0;
    LatticeSurface Y;
    LatticeSurface Z;
    LatticeSurface penalized_Y;
    LatticeSurface obstacle;
    LatticeSurface A_increments;
    LatticeSurface A1_increments;
    LatticeSurface A2_increments;
    /// E*(Y_{i+1}) - E_v(Y_{i+1}) for the clipped Y.
    LatticeSurface defect_low;
    LatticeSurface defect_high;
    PenalizationReport report;
};

/// Requires a valid spec with obstacle and dt*(L+n) < 1/2.
PenalizedSolution solve_penalized(const ProblemSpec& spec, double n, const SolveOptions& options = {});

/// Problem on the coarsest dt-halving refinement of spec satisfying dt*(L+n) < 1/2.
ProblemSpec refine_for_penalty(const ProblemSpec& spec, double n);

/// Runs the ladder until sup_excess <= tol and the Cauchy gap <= tol, refining dt as needed.
ReflectedSolution solve_reflected(const ProblemSpec& spec, const ReflectedOptions& options = {});

/// Table of ladder diagnostics plus the log-log slope of sup_excess against n.
PenalizationReport rate_study(const ProblemSpec& spec, const std::vector<double>& n_list,
                              const SolveOptions& options = {});

/// Least-squares slope of log(sup_excess) on log(n); Exact if every excess is zero.
void fit_rate(PenalizationReport& report);

/// Y^n >= Y^{n'} nodewise for n < n', and Y^n >= the clipped limit, on one common grid.
CheckResult monotonicity_check(const ProblemSpec& spec, const std::vector<double>& n_list,
                               const SolveOptions& options = {});

/// -int (S - Y) dA is pathwise nonincreasing and has G-martingale defect <= 5 sup_excess_final.
CheckResult martingale_condition_check(const ReflectedSolution& rs);

/// G-expected |sum (S - Y^n) dA2| against T * n_final * sup_excess^2.
CheckResult skorokhod_check(const ReflectedSolution& rs);

/// max |Y^n| over the ladder against max(|xi|, |S|, plain G-BSDE bound) + 1.
CheckResult uniform_bound_check(const ProblemSpec& spec, const PenalizationReport& report);

/// L_T, K_T and var_A never exceed 2x their first-rung value + 1.
CheckResult variation_bound_check(const PenalizationReport& report);

/// Cauchy gaps strictly decreasing from the first rung with sup_excess < 0.1.
CheckResult cauchy_check(const PenalizationReport& report);

/// Fitted slope within [lo, hi] and sup_excess nonincreasing along the ladder. Fails if the slope is not fitted.
CheckResult rate_slope_check(const PenalizationReport& report, double lo = -1.3, double hi = -0.7);

std::string to_string(SlopeStatus s);

}  // namespace gbsde
