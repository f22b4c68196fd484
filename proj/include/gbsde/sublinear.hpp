#pragma once

#include "gbsde/model.hpp"

#include <span>
#include <vector>

namespace gbsde {

/// Volatility scenario evaluated per node. Only the band endpoints are ever needed.
enum class Scenario { Low = 0, High = 1 };

/// Three-point stencil law of one lattice step under a fixed variance rate.
struct StencilWeights {
    double p_up = 0.0;
    double p_mid = 1.0;
    double p_down = 0.0;
};

/**
 * Weights p_up = p_down = v*dt/(2h^2), p_mid = 1 - v*dt/h^2.
 *
 * Throws InvalidInput when v*dt > h^2 (a ratio within 1e-12 of 1 is snapped to 1).
 */
StencilWeights stencil_weights(double variance_rate, double dt, double h);

/// Outcome of the per-node maximization over the two scenarios.
struct SupResult {
    double value = 0.0;
    Scenario argmax = Scenario::High;
};

/// Number of OpenMP threads used by per-node loops. Never changes results.
void set_thread_count(int n);
int thread_count();

/**
 * One-step and multi-step conditional G-expectation on a symmetric lattice.
 *
 * The one-step operator is max over v in {sigma_lo_sq, sigma_hi_sq} of the
 * three-point stencil expectation, which equals V_j + dt*G(D2 V)(j). The
 * stencil is affine in v, so the two endpoints suffice.
 *
 * Stencil values are clamped to the [min, max] of the three inputs, which is
 * a no-op in exact arithmetic and makes monotonicity and constant
 * preservation hold bitwise.
 */
class GExpectation {
public:
    GExpectation(const VolatilityBand& band, const TimeGrid& grid, const SpatialLattice& lattice,
                 const TerminalFn& terminal = {});
    explicit GExpectation(const ProblemSpec& spec);

    [[nodiscard]] const VolatilityBand& band() const noexcept { return band_; }
    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] const SpatialLattice& lattice() const noexcept { return lattice_; }
    [[nodiscard]] const StencilWeights& weights(Scenario s) const noexcept {
        return s == Scenario::High ? hi_ : lo_;
    }

    /// Stencil expectation of the next-step row at node k under scenario s.
    [[nodiscard]] double expectation(std::span<const double> next, int k, Scenario s) const;

    /// max over scenarios; ties resolve to Scenario::High.
    [[nodiscard]] SupResult one_step_sup(std::span<const double> next, int k) const;

    /// Applies one_step_sup to every node of `next`, writing `out`.
    void step(std::span<const double> next, std::span<double> out) const;

    /// Backward iteration of `row` (living at from_step) down to to_step.
    [[nodiscard]] std::vector<double> backward(std::span<const double> row, int from_step, int to_step) const;

    /// Rows to_step..n of E_{t_i}[xi]; row n is the terminal row itself.
    [[nodiscard]] LatticeSurface conditional(std::span<const double> terminal_row, int to_step = 0) const;

    /// E[xi] at the root node.
    [[nodiscard]] double expect(std::span<const double> terminal_row) const;

    /// Ghost values beyond |j| = J (only used in Dirichlet mode).
    [[nodiscard]] double ghost_low() const noexcept { return ghost_low_; }
    [[nodiscard]] double ghost_high() const noexcept { return ghost_high_; }

private:
    VolatilityBand band_;
    TimeGrid grid_;
    SpatialLattice lattice_;
    StencilWeights lo_;
    StencilWeights hi_;
    double ghost_low_ = 0.0;
    double ghost_high_ = 0.0;
};

/// Free-function forms of the operations above.
double one_step_sup(const GExpectation& op, std::span<const double> next, int k);
LatticeSurface conditional_g_expectation(const GExpectation& op, std::span<const double> terminal_row,
                                         int to_step = 0);
double g_expectation(const GExpectation& op, std::span<const double> terminal_row);

/**
 * Controlled accumulation: W_i(j) = max_v [cost_v(i, j) + E_v[W_{i+1}](j)], W_n = terminal.
 *
 * Evaluates sup over volatility controls of the expected total of a
 * scenario-dependent running cost. cost_low / cost_high hold rows 0..n-1.
 */
double controlled_accumulation(const GExpectation& op, const LatticeSurface& cost_low,
                               const LatticeSurface& cost_high, std::span<const double> terminal = {});

}  // namespace gbsde
