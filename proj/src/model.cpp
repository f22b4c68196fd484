#include "gbsde/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace gbsde {

LatticeSurface::LatticeSurface(SurfaceKind kind, int n_steps, int width, int first_step)
    : kind_(kind), n_steps_(n_steps), width_(width), first_step_(first_step) {
    if (n_steps < 0 || width <= 0 || first_step < 0 || first_step > n_steps) {
        throw InvalidInput("LatticeSurface: bad dimensions");
    }
    values_.assign(static_cast<std::size_t>(n_steps - first_step + 1) * static_cast<std::size_t>(width), 0.0);
}

std::span<double> LatticeSurface::row(int i) {
    return {values_.data() + index(i, 0), static_cast<std::size_t>(width_)};
}

std::span<const double> LatticeSurface::row(int i) const {
    return {values_.data() + index(i, 0), static_cast<std::size_t>(width_)};
}

bool LatticeSurface::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double LatticeSurface::max_abs() const noexcept {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

namespace {

void require_compatible(const LatticeSurface& a, const LatticeSurface& b) {
    if (a.n_steps() != b.n_steps() || a.width() != b.width()) {
        throw InvalidInput("surfaces live on different lattices");
    }
}

}  // namespace

double max_abs_difference(const LatticeSurface& a, const LatticeSurface& b) {
    require_compatible(a, b);
    double m = 0.0;
    for (int i = std::max(a.first_step(), b.first_step()); i <= a.n_steps(); ++i) {
        for (int k = 0; k < a.width(); ++k) m = std::max(m, std::abs(a.at(i, k) - b.at(i, k)));
    }
    return m;
}

double min_difference(const LatticeSurface& a, const LatticeSurface& b) {
    require_compatible(a, b);
    double m = std::numeric_limits<double>::infinity();
    for (int i = std::max(a.first_step(), b.first_step()); i <= a.n_steps(); ++i) {
        for (int k = 0; k < a.width(); ++k) m = std::min(m, a.at(i, k) - b.at(i, k));
    }
    return m;
}

std::vector<SpecViolation> validate_spec(const ProblemSpec& spec, const ValidateOptions& options) {
    std::vector<SpecViolation> out;
    auto report = [&out](std::string invariant, std::string detail, int step = -1, int node = -1,
                         double value = 0.0) {
        out.push_back({std::move(invariant), std::move(detail), step, node, value});
    };

    const auto& band = spec.band;
    if (!(band.sigma_lo_sq > 0.0) || !(band.sigma_lo_sq <= band.sigma_hi_sq)) {
        report("non-degeneracy", "require 0 < sigma_lo_sq <= sigma_hi_sq", -1, -1, band.sigma_lo_sq);
    }
    if (spec.grid.n_steps < 1 || !(spec.grid.horizon > 0.0)) {
        report("time grid", "require T > 0 and n_steps >= 1", -1, -1, spec.grid.horizon);
        return out;
    }
    if (spec.lattice.half_width < 1 || !(spec.lattice.spacing > 0.0)) {
        report("spatial lattice", "require h > 0 and J >= 1", -1, -1, spec.lattice.spacing);
        return out;
    }

    const double dt = spec.grid.dt();
    const double h = spec.lattice.spacing;
    const double cfl = band.sigma_hi_sq * dt;
    if (cfl > h * h * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "sigma_hi_sq*dt = " << cfl << " exceeds h^2 = " << h * h;
        report("CFL", msg.str(), -1, -1, cfl / (h * h));
    }
    const double reach = options.coverage_sigmas * std::sqrt(band.sigma_hi_sq * spec.grid.horizon);
    const double covered = spec.lattice.half_width * h;
    if (covered < reach * (1.0 - 1e-12)) {
        std::ostringstream msg;
        msg << "J*h = " << covered << " < " << options.coverage_sigmas << " std devs = " << reach;
        report("coverage", msg.str(), -1, -1, covered);
    }
    const double budget = dt * (spec.lipschitz + options.extra_lipschitz);
    if (!(budget < 0.5)) {
        std::ostringstream msg;
        msg << "dt*(L+n) = " << budget << " must be < 1/2; refine the time grid";
        report("Picard contraction", msg.str(), -1, -1, budget);
    }

    if (!spec.terminal) {
        report("terminal", "terminal function missing");
        return out;
    }
    const int width = spec.lattice.size();
    const int n = spec.grid.n_steps;
    for (int k = 0; k < width; ++k) {
        const double xi = spec.terminal(spec.lattice.x(k));
        if (!std::isfinite(xi)) report("finite terminal", "terminal value not finite", n, k, xi);
    }

    if (spec.driver) {
        static constexpr std::array<double, 5> ys{-2.0, -0.5, 0.0, 0.7, 3.0};
        static constexpr std::array<double, 3> zs{-2.0, 0.0, 1.3};
        const int step_stride = std::max(1, n / 8);
        const int node_stride = std::max(1, width / 16);
        bool reported = false;
        for (int i = 0; i < n && !reported; i += step_stride) {
            const double t = spec.grid.t(i);
            for (int k = 0; k < width && !reported; k += node_stride) {
                const double x = spec.lattice.x(k);
                for (std::size_t a = 0; a < ys.size() && !reported; ++a) {
                    for (std::size_t b = 0; b < zs.size() && !reported; ++b) {
                        const double f0 = spec.driver(t, x, ys[a], zs[b]);
                        if (!std::isfinite(f0)) {
                            report("finite driver", "driver value not finite", i, k, f0);
                            reported = true;
                            break;
                        }
                        for (std::size_t c = 0; c < ys.size(); ++c) {
                            for (std::size_t d = 0; d < zs.size(); ++d) {
                                const double f1 = spec.driver(t, x, ys[c], zs[d]);
                                const double bound =
                                    spec.lipschitz * (std::abs(ys[a] - ys[c]) + std::abs(zs[b] - zs[d]));
                                if (std::abs(f0 - f1) > bound * (1.0 + 1e-9) + 1e-12) {
                                    std::ostringstream msg;
                                    msg << "|f(y,z)-f(y',z')| = " << std::abs(f0 - f1) << " > L*(...) = " << bound;
                                    report("Lipschitz driver", msg.str(), i, k, std::abs(f0 - f1));
                                    reported = true;
                                }
                                if (reported) break;
                            }
                            if (reported) break;
                        }
                    }
                }
            }
        }
    }

    if (options.check_obstacle && spec.obstacle) {
        for (int k = 0; k < width; ++k) {
            const double x = spec.lattice.x(k);
            const double xi = spec.terminal(x);
            const double s = spec.obstacle(spec.grid.horizon, x);
            if (xi > s) {
                std::ostringstream msg;
                msg << "terminal dominance at node j=" << (k - spec.lattice.half_width) << ": xi = " << xi
                    << " > S_T = " << s;
                report("terminal dominance", msg.str(), n, k, xi - s);
            }
        }
        for (int i = 0; i <= n; ++i) {
            for (int k = 0; k < width; ++k) {
                const double s = spec.obstacle(spec.grid.t(i), spec.lattice.x(k));
                if (!std::isfinite(s)) {
                    report("finite obstacle", "obstacle value not finite", i, k, s);
                    i = n + 1;
                    break;
                }
            }
        }
    }
    return out;
}

Grid build_grid(const VolatilityBand& band, double horizon, int n_steps, double coverage_sigmas,
                BoundaryMode boundary) {
    if (!(horizon > 0.0)) throw InvalidInput("build_grid: T must be positive");
    if (n_steps < 1) throw InvalidInput("build_grid: n_steps must be >= 1");
    if (!(coverage_sigmas >= 1.0)) throw InvalidInput("build_grid: coverage_sigmas must be >= 1");
    if (!(band.sigma_hi_sq > 0.0)) throw InvalidInput("build_grid: sigma_hi_sq must be positive");

    Grid g;
    g.time = TimeGrid{horizon, n_steps};
    const double h = std::sqrt(band.sigma_hi_sq * g.time.dt());
    const double ratio = coverage_sigmas * std::sqrt(band.sigma_hi_sq * horizon) / h;
    // ratio is an integer in exact arithmetic for the usual inputs; do not let 1 ulp add a node
    g.lattice = SpatialLattice{h, static_cast<int>(std::ceil(ratio * (1.0 - 1e-12))), boundary};
    return g;
}

ProblemSpec refine_time_grid(const ProblemSpec& spec) {
    ProblemSpec out = spec;
    out.grid.n_steps = spec.grid.n_steps * 2;
    const double h = std::sqrt(spec.band.sigma_hi_sq * out.grid.dt());
    const double covered = spec.lattice.half_width * spec.lattice.spacing;
    out.lattice.spacing = h;
    out.lattice.half_width = static_cast<int>(std::ceil(covered / h * (1.0 - 1e-12)));
    return out;
}

std::vector<double> terminal_row(const ProblemSpec& spec) {
    if (!spec.terminal) throw InvalidInput("terminal function missing");
    std::vector<double> row(static_cast<std::size_t>(spec.lattice.size()));
    for (int k = 0; k < spec.lattice.size(); ++k) row[static_cast<std::size_t>(k)] = spec.terminal(spec.lattice.x(k));
    return row;
}

std::vector<double> obstacle_row(const ProblemSpec& spec, int i) {
    if (!spec.obstacle) throw InvalidInput("obstacle missing");
    const double t = spec.grid.t(i);
    std::vector<double> row(static_cast<std::size_t>(spec.lattice.size()));
    for (int k = 0; k < spec.lattice.size(); ++k) row[static_cast<std::size_t>(k)] = spec.obstacle(t, spec.lattice.x(k));
    return row;
}

}  // namespace gbsde
