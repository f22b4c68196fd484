#pragma once

#include "gbsde/diagnostics.hpp"
#include "gbsde/model.hpp"
#include "gbsde/solver.hpp"

#include <functional>

namespace gbsde {

/// Deterministic drift rate a >= 0 added to the solver's own defect to form K1_t = K~_t + a t.
struct SubmartingalePerturbation {
    double rate_a = 0.0;
};

using CoefficientFn = std::function<double(double t)>;

/**
 * Deterministic coefficients of the linear pair
 *   f = a y + b z + m,  g = c y + d z + n  (g integrates against d<B>).
 * An empty function means the zero coefficient.
 */
struct LinearCoefficients {
    CoefficientFn a, b, c, d, m, n;

    /// max over grid times of every |coefficient|.
    [[nodiscard]] double bound(const TimeGrid& grid) const;
};

struct VariantComparison {
    CheckResult check;
    GBsdeSolution first;
    GBsdeSolution second;
};

/**
 * Solves (Y1, Z1) with terminal xi1 and driver f1 - rate_a, and (Y2, Z2) = solve_gbsde(spec2),
 * then checks Y1 <= Y2 at every node. The margin is min(Y2 - Y1).
 *
 * Throws InvalidInput if xi1 > xi2 at some node, f1 > f2 on the sample set, or rate_a < 0.
 * f1 must share spec2.lipschitz.
 */
VariantComparison variant_compare(const ProblemSpec& spec2, const SubmartingalePerturbation& perturbation,
                                  const TerminalFn& xi1, const DriverFn& f1);

/// Solves both specs on their common grid and checks Y1 >= Y2 at every node (no tolerance).
CheckResult comparison_check(const ProblemSpec& spec1, const ProblemSpec& spec2);

/// min over nodes i < n of one_step_sup(K_{i+1})(j) - K_{i,j}; nonnegative for a lattice G-submartingale.
double submartingale_margin(const GExpectation& op, const LatticeSurface& K);

/**
 * Checks that int X^+ dK1 + int X^- dK2 has nonnegative one-step conditional sup of increments
 * (>= -1e-12) at every node. X is the step process (rows 0..n-1 used); K1, K2 are value surfaces.
 * Throws InvalidInput if K1 or K2 fails the submartingale pre-test.
 */
CheckResult submartingale_integral_check(const GExpectation& op, const LatticeSurface& X, const LatticeSurface& K1,
                                         const LatticeSurface& K2);

struct DualityReport {
    CheckResult identity;
    CheckResult inequality;
    /// Lattice solution of the linear BSDE with driver (a+cv) y + (b+dv) z + (m+nv).
    LatticeSurface bsde_Y;
    /// X_t^{-1} E_t[X_T xi + int (m + n v) X ds] evaluated on the tree.
    LatticeSurface dual_Y;
    /// X_t^{-1} E_t[X_T K_T - int (a + c v) K X ds] evaluated on the tree.
    LatticeSurface dual_K;
};

/**
 * Explicit linearization process in the classical band sigma_lo_sq = sigma_hi_sq = v,
 * where the second Brownian motion collapses to B / v. On each step
 *   X_{i+1} / X_i = exp((a - b d + c v - d^2 v / 2 - b^2 / (2v)) dt + (d + b / v) dB).
 * Checks (a) the duality identity against the lattice BSDE within 10 dt (1 + max|Y|)
 * on the central quarter of the lattice (|j| <= J/4) and (b) K_t <= X_t^{-1} E_t[X_T K_T - int (a + c v) K X ds]
 * with slack >= -2 dt (1 + max|K|). K is a value surface of a submartingale.
 * Throws InvalidInput for a non-degenerate band.
 */
DualityReport linearized_duality_check(const ProblemSpec& spec, const LinearCoefficients& coeffs,
                                       const LatticeSurface& K);

}  // namespace gbsde
