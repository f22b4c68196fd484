#pragma once

#include "gbsde/model.hpp"
#include "gbsde/sublinear.hpp"

#include <span>
#include <stdexcept>
#include <string>

namespace gbsde {

/// Raised when the per-node Picard iteration does not reach its tolerance.
class PicardDivergence : public std::runtime_error {
public:
    PicardDivergence(const std::string& what, int step, int node)
        : std::runtime_error(what), step_(step), node_(node) {}
    [[nodiscard]] int step() const noexcept { return step_; }
    [[nodiscard]] int node() const noexcept { return node_; }

private:
    int step_;
    int node_;
};

struct SolveOptions {
    double picard_tol = 1e-13;
    int picard_max_iter = 100;
    /// Snap each node value to the smallest double solving the node equation.
    bool exact_root = true;
};

/**
 * Lattice solution (Y, Z, K) of a G-BSDE.
 *
 * K is not stored as a path process. Its lattice witness is the per-scenario
 * defect E* - E_v[Y_{i+1}] >= 0, which is zero for the maximizing scenario:
 * the expected K-increment under scenario v is -defect(v).
 */
struct GBsdeSolution {
    LatticeSurface Y;
    LatticeSurface Z;
    LatticeSurface defect_low;
    LatticeSurface defect_high;

    [[nodiscard]] const LatticeSurface& defect(Scenario s) const noexcept {
        return s == Scenario::High ? defect_high : defect_low;
    }
    [[nodiscard]] double root() const { return Y.at(0, Y.width() / 2); }
};

/// Driver term -n (y - S(t,x))^+ added on top of the problem's own driver.
struct Penalty {
    double level = 0.0;
    ObstacleFn obstacle;
};

/**
 * Backward recursion shared by every solver in the library.
 *
 * Z_{i,j} = central difference of Y_{i+1} (one-sided at |j| = J);
 * E* = one_step_sup(Y_{i+1}, j); Y_{i,j} solves y = E* + dt f(t_i, x_j, y, Z_{i,j})
 * with f including the optional penalty. Requires dt*(lipschitz + n) < 1/2.
 */
GBsdeSolution solve_backward(const GExpectation& op, std::span<const double> terminal, const DriverFn& driver,
                             double lipschitz, const Penalty* penalty = nullptr, const SolveOptions& options = {});

/// Unreflected G-BSDE for spec (obstacle ignored). Validates the spec first.
GBsdeSolution solve_gbsde(const ProblemSpec& spec, const SolveOptions& options = {});

/// Y surface of the G-BSDE with driver L|z|: the dominating sublinear expectation.
LatticeSurface girsanov_expectation(const ProblemSpec& spec, std::span<const double> terminal, double L,
                                    const SolveOptions& options = {});

/// Solves y = estar + dt * f(y) - dt * n (y - s)^+ for one node. Exposed for testing.
double solve_node_equation(double estar, double dt, const std::function<double(double)>& f, double penalty_level,
                           double obstacle_value, const SolveOptions& options, int step = -1, int node = -1);

}  // namespace gbsde
