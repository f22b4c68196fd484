#include "gbsde/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gbsde {

namespace {

double eval(const CoefficientFn& fn, double t) { return fn ? fn(t) : 0.0; }

void require_valid(const ProblemSpec& spec, const char* who) {
    ValidateOptions vopt;
    vopt.check_obstacle = false;
    const auto violations = validate_spec(spec, vopt);
    if (!violations.empty()) {
        throw InvalidInput(std::string(who) + ": " + violations.front().invariant + ": " + violations.front().detail);
    }
}

void require_same_lattice(const ProblemSpec& a, const ProblemSpec& b) {
    if (a.grid.n_steps != b.grid.n_steps || a.grid.horizon != b.grid.horizon ||
        a.lattice.size() != b.lattice.size() || a.lattice.spacing != b.lattice.spacing) {
        throw InvalidInput("comparison: both problems must live on the same grid");
    }
}

}  // namespace

double LinearCoefficients::bound(const TimeGrid& grid) const {
    double out = 0.0;
    for (int i = 0; i <= grid.n_steps; ++i) {
        const double t = grid.t(i);
        for (const CoefficientFn* fn : {&a, &b, &c, &d, &m, &n}) out = std::max(out, std::abs(eval(*fn, t)));
    }
    return out;
}

VariantComparison variant_compare(const ProblemSpec& spec2, const SubmartingalePerturbation& perturbation,
                                  const TerminalFn& xi1, const DriverFn& f1) {
    const double a = perturbation.rate_a;
    if (!(a >= 0.0)) throw InvalidInput("variant_compare: rate_a must be nonnegative");
    require_valid(spec2, "variant_compare");

    const int width = spec2.lattice.size();
    for (int k = 0; k < width; ++k) {
        const double x = spec2.lattice.x(k);
        if (xi1(x) > spec2.terminal(x)) {
            std::ostringstream msg;
            msg << "variant_compare: xi1 > xi2 at x = " << x;
            throw InvalidInput(msg.str());
        }
    }
    const double ys[] = {-2.0, -0.5, 0.0, 0.7, 3.0};
    const double zs[] = {-2.0, 0.0, 1.3};
    const int n = spec2.grid.n_steps;
    const int stride = std::max(1, width / 16);
    for (int i : {0, n / 2, n - 1}) {
        const double t = spec2.grid.t(i);
        for (int k = 0; k < width; k += stride) {
            const double x = spec2.lattice.x(k);
            for (double y : ys) {
                for (double z : zs) {
                    const double lhs = f1 ? f1(t, x, y, z) : 0.0;
                    if (lhs > spec2.f(t, x, y, z)) {
                        std::ostringstream msg;
                        msg << "variant_compare: f1 > f2 at (t, x, y, z) = (" << t << ", " << x << ", " << y << ", "
                            << z << ")";
                        throw InvalidInput(msg.str());
                    }
                }
            }
        }
    }

    ProblemSpec spec1 = spec2;
    spec1.terminal = xi1;
    spec1.driver = [f1, a](double t, double x, double y, double z) { return (f1 ? f1(t, x, y, z) : 0.0) - a; };

    VariantComparison out{CheckResult{}, solve_gbsde(spec1), solve_gbsde(spec2)};
    const double margin = min_difference(out.second.Y, out.first.Y);
    out.check.name = "variant_comparison";
    out.check.pass = margin >= 0.0;
    out.check.margin = margin;
    out.check.tolerance = 0.0;
    out.check.anchor = "variant comparison: Y1 <= Y2 under a G-submartingale perturbation";
    std::ostringstream detail;
    detail << "rate_a=" << a << " min(Y2-Y1)=" << margin;
    out.check.detail = detail.str();
    return out;
}

CheckResult comparison_check(const ProblemSpec& spec1, const ProblemSpec& spec2) {
    require_same_lattice(spec1, spec2);
    const auto first = solve_gbsde(spec1);
    const auto second = solve_gbsde(spec2);
    CheckResult out;
    out.name = "comparison";
    out.margin = min_difference(first.Y, second.Y);
    out.pass = out.margin >= 0.0;
    out.tolerance = 0.0;
    out.anchor = "comparison theorem: ordered data give ordered solutions";
    std::ostringstream detail;
    detail << "min(Y1-Y2)=" << out.margin;
    out.detail = detail.str();
    return out;
}

double submartingale_margin(const GExpectation& op, const LatticeSurface& K) {
    const int n = op.grid().n_steps;
    const int width = op.lattice().size();
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const auto next = K.row(i + 1);
        for (int k = 0; k < width; ++k) margin = std::min(margin, op.one_step_sup(next, k).value - K.at(i, k));
    }
    return margin;
}

CheckResult submartingale_integral_check(const GExpectation& op, const LatticeSurface& X, const LatticeSurface& K1,
                                         const LatticeSurface& K2) {
    constexpr double kTol = 1e-12;
    for (const LatticeSurface* K : {&K1, &K2}) {
        const double m = submartingale_margin(op, *K);
        if (m < -kTol) {
            std::ostringstream msg;
            msg << "submartingale_integral_check: K fails the G-submartingale test (margin " << m << ")";
            throw InvalidInput(msg.str());
        }
    }
    const int n = op.grid().n_steps;
    const int width = op.lattice().size();
    double margin = std::numeric_limits<double>::infinity();
    std::vector<double> next(static_cast<std::size_t>(width));
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < width; ++k) {
            const double xp = std::max(X.at(i, k), 0.0);
            const double xm = std::max(-X.at(i, k), 0.0);
            // X is frozen at the current node, so the increment's stencil law is that of this combination.
            for (int c = 0; c < width; ++c) {
                next[static_cast<std::size_t>(c)] = xp * (K1.at(i + 1, c) - K1.at(i, k)) + xm * (K2.at(i + 1, c) - K2.at(i, k));
            }
            margin = std::min(margin, op.one_step_sup(next, k).value);
        }
    }
    CheckResult out;
    out.name = "submartingale_integral";
    out.margin = margin;
    out.tolerance = kTol;
    out.pass = margin >= -kTol;
    out.anchor = "int X^+ dK1 + int X^- dK2 is a G-submartingale";
    std::ostringstream detail;
    detail << "min one-step sup of increments=" << margin;
    out.detail = detail.str();
    return out;
}

DualityReport linearized_duality_check(const ProblemSpec& spec, const LinearCoefficients& coeffs,
                                       const LatticeSurface& K) {
    if (!spec.band.degenerate()) {
        throw InvalidInput("linearized_duality_check: only the classical band sigma_lo_sq == sigma_hi_sq is supported");
    }
    const double v = spec.band.sigma_hi_sq;
    const TimeGrid& grid = spec.grid;
    const int n = grid.n_steps;
    const int width = spec.lattice.size();
    const int J = spec.lattice.half_width;
    const double dt = grid.dt();
    const double h = spec.lattice.spacing;

    ProblemSpec linear = spec;
    linear.obstacle = {};
    linear.driver = [&coeffs, v](double t, double, double y, double z) {
        return (eval(coeffs.a, t) + eval(coeffs.c, t) * v) * y + (eval(coeffs.b, t) + eval(coeffs.d, t) * v) * z +
               eval(coeffs.m, t) + eval(coeffs.n, t) * v;
    };
    double L = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = grid.t(i);
        L = std::max(L, std::abs(eval(coeffs.a, t) + eval(coeffs.c, t) * v) +
                            std::abs(eval(coeffs.b, t) + eval(coeffs.d, t) * v));
    }
    linear.lipschitz = L;

    DualityReport out{CheckResult{}, CheckResult{}, solve_gbsde(linear).Y, LatticeSurface(SurfaceKind::Y, n, width),
                      LatticeSurface(SurfaceKind::Y, n, width)};

    const GExpectation op(linear);
    const StencilWeights w = op.weights(Scenario::High);
    for (int k = 0; k < width; ++k) {
        out.dual_Y.at(n, k) = spec.terminal(spec.lattice.x(k));
        out.dual_K.at(n, k) = K.at(n, k);
    }
    for (int i = n - 1; i >= 0; --i) {
        const double t = grid.t(i);
        const double a = eval(coeffs.a, t), b = eval(coeffs.b, t), c = eval(coeffs.c, t), d = eval(coeffs.d, t);
        const double drift = (a - b * d + c * v - 0.5 * d * d * v - 0.5 * b * b / v) * dt;
        const double loading = (d + b / v) * h;
        const double r_mid = std::exp(drift);
        const double r_up = std::exp(drift + loading);
        const double r_down = std::exp(drift - loading);
        const double source = (eval(coeffs.m, t) + eval(coeffs.n, t) * v) * dt;
        const double decay = (a + c * v) * dt;
        for (int k = 0; k < width; ++k) {
            auto tilted = [&](const LatticeSurface& s) {
                if (k == 0 || k == width - 1) return r_mid * s.at(i + 1, k);
                return w.p_up * r_up * s.at(i + 1, k + 1) + w.p_mid * r_mid * s.at(i + 1, k) +
                       w.p_down * r_down * s.at(i + 1, k - 1);
            };
            out.dual_Y.at(i, k) = source + tilted(out.dual_Y);
            out.dual_K.at(i, k) = -decay * K.at(i, k) + tilted(out.dual_K);
        }
    }

    // the clamped lattice edge contaminates the two recursions differently; stay well inside it
    const int lo = J - J / 4;
    const int hi = J + J / 4;
    double err = 0.0;
    double slack = std::numeric_limits<double>::infinity();
    double max_y = 0.0;
    double max_k = 0.0;
    for (int i = 0; i <= n; ++i) {
        for (int k = lo; k <= hi; ++k) {
            err = std::max(err, std::abs(out.bsde_Y.at(i, k) - out.dual_Y.at(i, k)));
            slack = std::min(slack, out.dual_K.at(i, k) - K.at(i, k));
            max_y = std::max(max_y, std::abs(out.bsde_Y.at(i, k)));
            max_k = std::max(max_k, std::abs(K.at(i, k)));
        }
    }

    const double id_tol = 10.0 * dt * (1.0 + max_y);
    out.identity.name = "linearized_duality_identity";
    out.identity.margin = id_tol - err;
    out.identity.tolerance = id_tol;
    out.identity.pass = err <= id_tol;
    out.identity.anchor = "explicit linearization process: Y_t = X_t^-1 E_t[X_T xi + int m X ds + int n X d<B>]";
    std::ostringstream d1;
    d1 << "max identity error=" << err << " on the central quarter of the lattice";
    out.identity.detail = d1.str();

    const double ineq_tol = 2.0 * dt * (1.0 + max_k);
    out.inequality.name = "linearized_duality_inequality";
    out.inequality.margin = slack + ineq_tol;
    out.inequality.tolerance = ineq_tol;
    out.inequality.pass = slack >= -ineq_tol;
    out.inequality.anchor = "submartingale bound K_t <= X_t^-1 E_t[X_T K_T - int a K X ds - int c K X d<B>]";
    std::ostringstream d2;
    d2 << "min slack=" << slack;
    out.inequality.detail = d2.str();
    return out;
}

}  // namespace gbsde
