#pragma once

#include "gbsde/model.hpp"

namespace gbsde {

/**
 * Explicit finite-difference projection scheme for the upper-obstacle problem
 *   u_t + G(u_xx) + f(t, x, u, u_x) = 0,  u <= S,  u(T) = xi,
 * with f evaluated at the step i+1 values and u_i = min(S, u~_i).
 * Without an obstacle it is the plain explicit scheme.
 */
LatticeSurface solve_obstacle_fd(const ProblemSpec& spec);

/// Same explicit scheme with the penalty -n (u - S)^+ resolved implicitly per node.
LatticeSurface solve_penalized_fd(const ProblemSpec& spec, double n);

struct StoppingResult {
    LatticeSurface value;
    /// 1 where stopping (u = S) is optimal at a non-terminal node.
    LatticeSurface stop_region;
};

/// Classical (sigma_lo = sigma_hi) dynamic program u_i = min(S_i, E[u_{i+1}] + dt f(t_i, x)).
StoppingResult optimal_stopping_oracle(const ProblemSpec& spec);

/// Minimum over every Markov stopping set on the nodes reachable from the root (<= 22 decision nodes).
double brute_force_stopping_sets(const ProblemSpec& spec);

/// Optimal stopping over history-dependent rules by enumerating all paths from the root (<= 12 steps).
double brute_force_path_tree(const ProblemSpec& spec);

}  // namespace gbsde
