#include "gbsde/solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>

namespace gbsde {

namespace {

constexpr std::uint64_t kSignBit = 0x8000000000000000ULL;

// Monotone map from doubles to unsigned keys: a < b  <=>  key(a) < key(b).
std::uint64_t ordered_key(double d) {
    const auto u = std::bit_cast<std::uint64_t>(d);
    return (u & kSignBit) ? ~u : (u | kSignBit);
}

double from_ordered_key(std::uint64_t k) {
    const std::uint64_t u = (k & kSignBit) ? (k & ~kSignBit) : ~k;
    return std::bit_cast<double>(u);
}

// Smallest double y with F(y) >= 0 near a Picard estimate; empty if no bracket is found.
template <typename F>
std::optional<double> snap_root(const F& residual, double y) {
    double lo = y;
    double hi = y;
    const double scale = std::max(1.0, std::abs(y));
    double step = 4.0 * std::numeric_limits<double>::epsilon() * scale;
    if (residual(y) >= 0.0) {
        lo = std::nextafter(y, -std::numeric_limits<double>::infinity());
        for (int it = 0; residual(lo) >= 0.0; ++it) {
            if (it > 80) return std::nullopt;
            lo = y - step;
            step *= 2.0;
        }
    } else {
        hi = std::nextafter(y, std::numeric_limits<double>::infinity());
        for (int it = 0; residual(hi) < 0.0; ++it) {
            if (it > 80) return std::nullopt;
            hi = y + step;
            step *= 2.0;
        }
    }
    std::uint64_t klo = ordered_key(lo);
    std::uint64_t khi = ordered_key(hi);
    while (khi - klo > 1) {
        const std::uint64_t mid = klo + (khi - klo) / 2;
        if (residual(from_ordered_key(mid)) >= 0.0) {
            khi = mid;
        } else {
            klo = mid;
        }
    }
    return from_ordered_key(khi);
}

}  // namespace

double solve_node_equation(double estar, double dt, const std::function<double(double)>& f, double penalty_level,
                           double obstacle_value, const SolveOptions& options, int step, int node) {
    const double ndt = penalty_level * dt;
    // One Picard iterate with the piecewise-linear penalty resolved exactly.
    auto picard = [&](double y) {
        const double c = estar + dt * f(y);
        if (penalty_level <= 0.0 || c <= obstacle_value) return c;
        return obstacle_value + (c - obstacle_value) / (1.0 + ndt);
    };
    double y = estar;
    bool converged = false;
    for (int it = 0; it < options.picard_max_iter; ++it) {
        const double next = picard(y);
        const double change = std::abs(next - y);
        y = next;
        if (change <= options.picard_tol * std::max(1.0, std::abs(y))) {
            converged = true;
            break;
        }
    }
    if (!converged || !std::isfinite(y)) {
        std::ostringstream msg;
        msg << "Picard iteration did not converge at step " << step << ", node " << node
            << " (dt*(L+n) must stay below 1/2)";
        throw PicardDivergence(msg.str(), step, node);
    }
    if (!options.exact_root) return y;

    auto residual = [&](double v) {
        double total = f(v);
        if (penalty_level > 0.0) total -= penalty_level * std::max(v - obstacle_value, 0.0);
        return (v - dt * total) - estar;
    };
    return snap_root(residual, y).value_or(y);
}

GBsdeSolution solve_backward(const GExpectation& op, std::span<const double> terminal, const DriverFn& driver,
                             double lipschitz, const Penalty* penalty, const SolveOptions& options) {
    const TimeGrid& grid = op.grid();
    const SpatialLattice& lattice = op.lattice();
    const int n = grid.n_steps;
    const int width = lattice.size();
    const double dt = grid.dt();
    const double h = lattice.spacing;
    const double level = penalty ? penalty->level : 0.0;

    if (static_cast<int>(terminal.size()) != width) throw InvalidInput("terminal row width mismatch");
    if (penalty && (!penalty->obstacle || !(level >= 0.0))) {
        throw InvalidInput("penalty needs an obstacle and a nonnegative level");
    }
    if (!(dt * (lipschitz + level) < 0.5)) {
        std::ostringstream msg;
        msg << "dt*(L+n) = " << dt * (lipschitz + level) << " >= 1/2: refine the time grid (double n_steps)";
        throw InvalidInput(msg.str());
    }

    GBsdeSolution sol{LatticeSurface(SurfaceKind::Y, n, width), LatticeSurface(SurfaceKind::Z, n, width),
                      LatticeSurface(SurfaceKind::Defect, n, width), LatticeSurface(SurfaceKind::Defect, n, width)};
    std::copy(terminal.begin(), terminal.end(), sol.Y.row(n).begin());

    std::vector<double> obstacle(static_cast<std::size_t>(width), 0.0);
    std::vector<char> failed(static_cast<std::size_t>(width), 0);
    for (int i = n - 1; i >= 0; --i) {
        const double t = grid.t(i);
        if (penalty) {
            for (int k = 0; k < width; ++k) obstacle[static_cast<std::size_t>(k)] = penalty->obstacle(t, lattice.x(k));
        }
        const auto next = sol.Y.row(i + 1);
        auto y_row = sol.Y.row(i);
        auto z_row = sol.Z.row(i);
        auto d_lo = sol.defect_low.row(i);
        auto d_hi = sol.defect_high.row(i);
#ifdef GBSDE_HAVE_OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (width >= 256)
#endif
        for (int k = 0; k < width; ++k) {
            const auto uk = static_cast<std::size_t>(k);
            double z = 0.0;
            if (k == 0) {
                z = (next[1] - next[0]) / h;
            } else if (k == width - 1) {
                z = (next[uk] - next[uk - 1]) / h;
            } else {
                z = (next[uk + 1] - next[uk - 1]) / (2.0 * h);
            }
            const double e_lo = op.expectation(next, k, Scenario::Low);
            const double e_hi = op.expectation(next, k, Scenario::High);
            const double estar = e_hi >= e_lo ? e_hi : e_lo;
            const double x = lattice.x(k);
            double y = estar;
            if (driver || level > 0.0) {
                try {
                    auto f = [&](double v) { return driver ? driver(t, x, v, z) : 0.0; };
                    y = solve_node_equation(estar, dt, f, level, obstacle[uk], options, i, k);
                } catch (const PicardDivergence&) {
                    failed[uk] = 1;
                }
            }
            y_row[uk] = y;
            z_row[uk] = z;
            d_lo[uk] = estar - e_lo;
            d_hi[uk] = estar - e_hi;
        }
        for (int k = 0; k < width; ++k) {
            if (failed[static_cast<std::size_t>(k)]) {
                std::ostringstream msg;
                msg << "Picard iteration did not converge at step " << i << ", node j=" << (k - lattice.half_width);
                throw PicardDivergence(msg.str(), i, k);
            }
        }
    }
    return sol;
}

GBsdeSolution solve_gbsde(const ProblemSpec& spec, const SolveOptions& options) {
    ValidateOptions vopt;
    vopt.check_obstacle = false;
    const auto violations = validate_spec(spec, vopt);
    if (!violations.empty()) {
        throw InvalidInput("solve_gbsde: " + violations.front().invariant + ": " + violations.front().detail);
    }
    const GExpectation op(spec);
    const auto xi = terminal_row(spec);
    return solve_backward(op, xi, spec.driver, spec.lipschitz, nullptr, options);
}

LatticeSurface girsanov_expectation(const ProblemSpec& spec, std::span<const double> terminal, double L,
                                    const SolveOptions& options) {
    if (!(L >= 0.0)) throw InvalidInput("girsanov_expectation: L must be nonnegative");
    const GExpectation op(spec);
    DriverFn driver;
    if (L > 0.0) driver = [L](double, double, double, double z) { return L * std::abs(z); };
    return solve_backward(op, terminal, driver, L, nullptr, options).Y;
}

}  // namespace gbsde
