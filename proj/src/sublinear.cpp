#include "gbsde/sublinear.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#ifdef GBSDE_HAVE_OPENMP
#include <omp.h>
#endif

namespace gbsde {

namespace {

std::atomic<int> g_threads{1};

}  // namespace

void set_thread_count(int n) { g_threads.store(std::max(1, n)); }

int thread_count() { return g_threads.load(); }

StencilWeights stencil_weights(double variance_rate, double dt, double h) {
    if (!(variance_rate >= 0.0) || !(dt > 0.0) || !(h > 0.0)) {
        throw InvalidInput("stencil_weights: require v >= 0, dt > 0, h > 0");
    }
    double r = variance_rate * dt / (h * h);
    if (r > 1.0) {
        if (r > 1.0 + 1e-12) {
            std::ostringstream msg;
            msg << "stencil_weights: v*dt/h^2 = " << r << " > 1 breaks monotonicity";
            throw InvalidInput(msg.str());
        }
        r = 1.0;
    }
    const double p = 0.5 * r;
    return {p, 1.0 - r, p};
}

GExpectation::GExpectation(const VolatilityBand& band, const TimeGrid& grid, const SpatialLattice& lattice,
                           const TerminalFn& terminal)
    : band_(band),
      grid_(grid),
      lattice_(lattice),
      lo_(stencil_weights(band.sigma_lo_sq, grid.dt(), lattice.spacing)),
      hi_(stencil_weights(band.sigma_hi_sq, grid.dt(), lattice.spacing)) {
    if (!(band.sigma_lo_sq > 0.0) || band.sigma_lo_sq > band.sigma_hi_sq) {
        throw InvalidInput("GExpectation: require 0 < sigma_lo_sq <= sigma_hi_sq");
    }
    if (lattice.boundary == BoundaryMode::DirichletTerminalExtension) {
        if (!terminal) throw InvalidInput("GExpectation: Dirichlet boundary needs the terminal function");
        ghost_low_ = terminal(lattice.x(-1));
        ghost_high_ = terminal(lattice.x(lattice.size()));
    }
}

GExpectation::GExpectation(const ProblemSpec& spec)
    : GExpectation(spec.band, spec.grid, spec.lattice, spec.terminal) {}

double GExpectation::expectation(std::span<const double> next, int k, Scenario s) const {
    const int last = static_cast<int>(next.size()) - 1;
    const double mid = next[static_cast<std::size_t>(k)];
    double up = 0.0;
    double down = 0.0;
    if (k == 0 || k == last) {
        if (lattice_.boundary == BoundaryMode::ClampSecondDifference) return mid;
        down = k == 0 ? ghost_low_ : next[static_cast<std::size_t>(k - 1)];
        up = k == last ? ghost_high_ : next[static_cast<std::size_t>(k + 1)];
    } else {
        down = next[static_cast<std::size_t>(k - 1)];
        up = next[static_cast<std::size_t>(k + 1)];
    }
    const StencilWeights& w = weights(s);
    const double value = (w.p_up * up + w.p_down * down) + w.p_mid * mid;
    const double lo = std::min({up, mid, down});
    const double hi = std::max({up, mid, down});
    return std::clamp(value, lo, hi);
}

SupResult GExpectation::one_step_sup(std::span<const double> next, int k) const {
    const double high = expectation(next, k, Scenario::High);
    const double low = expectation(next, k, Scenario::Low);
    if (high >= low) return {high, Scenario::High};
    return {low, Scenario::Low};
}

void GExpectation::step(std::span<const double> next, std::span<double> out) const {
    const int width = static_cast<int>(next.size());
#ifdef GBSDE_HAVE_OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (width >= 512)
#endif
    for (int k = 0; k < width; ++k) out[static_cast<std::size_t>(k)] = one_step_sup(next, k).value;
}

std::vector<double> GExpectation::backward(std::span<const double> row, int from_step, int to_step) const {
    if (to_step < 0 || to_step > from_step || from_step > grid_.n_steps) {
        throw InvalidInput("GExpectation::backward: require 0 <= to_step <= from_step <= n");
    }
    if (static_cast<int>(row.size()) != lattice_.size()) throw InvalidInput("row width mismatch");
    std::vector<double> cur(row.begin(), row.end());
    std::vector<double> prev(cur.size());
    for (int i = from_step; i > to_step; --i) {
        step(cur, prev);
        cur.swap(prev);
    }
    return cur;
}

LatticeSurface GExpectation::conditional(std::span<const double> terminal_row, int to_step) const {
    const int n = grid_.n_steps;
    if (to_step < 0 || to_step > n) throw InvalidInput("conditional: to_step out of range");
    if (static_cast<int>(terminal_row.size()) != lattice_.size()) throw InvalidInput("row width mismatch");
    LatticeSurface surface(SurfaceKind::Y, n, lattice_.size(), to_step);
    std::copy(terminal_row.begin(), terminal_row.end(), surface.row(n).begin());
    for (int i = n - 1; i >= to_step; --i) step(surface.row(i + 1), surface.row(i));
    return surface;
}

double GExpectation::expect(std::span<const double> terminal_row) const {
    return backward(terminal_row, grid_.n_steps, 0)[static_cast<std::size_t>(lattice_.center())];
}

double one_step_sup(const GExpectation& op, std::span<const double> next, int k) {
    return op.one_step_sup(next, k).value;
}

LatticeSurface conditional_g_expectation(const GExpectation& op, std::span<const double> terminal_row,
                                         int to_step) {
    return op.conditional(terminal_row, to_step);
}

double g_expectation(const GExpectation& op, std::span<const double> terminal_row) {
    return op.expect(terminal_row);
}

double controlled_accumulation(const GExpectation& op, const LatticeSurface& cost_low,
                               const LatticeSurface& cost_high, std::span<const double> terminal) {
    const int n = op.grid().n_steps;
    const int width = op.lattice().size();
    std::vector<double> next(static_cast<std::size_t>(width), 0.0);
    if (!terminal.empty()) {
        if (static_cast<int>(terminal.size()) != width) throw InvalidInput("row width mismatch");
        next.assign(terminal.begin(), terminal.end());
    }
    std::vector<double> cur(next.size());
    for (int i = n - 1; i >= 0; --i) {
#ifdef GBSDE_HAVE_OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (width >= 512)
#endif
        for (int k = 0; k < width; ++k) {
            const double lo = cost_low.at(i, k) + op.expectation(next, k, Scenario::Low);
            const double hi = cost_high.at(i, k) + op.expectation(next, k, Scenario::High);
            cur[static_cast<std::size_t>(k)] = std::max(lo, hi);
        }
        next.swap(cur);
    }
    return next[static_cast<std::size_t>(op.lattice().center())];
}

}  // namespace gbsde
