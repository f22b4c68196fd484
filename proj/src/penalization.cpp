#include "gbsde/penalization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gbsde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_obstacle_problem(const ProblemSpec& spec, double extra_lipschitz) {
    if (!spec.has_obstacle()) throw InvalidInput("penalization needs an obstacle");
    ValidateOptions vopt;
    vopt.extra_lipschitz = extra_lipschitz;
    const auto violations = validate_spec(spec, vopt);
    if (!violations.empty()) {
        throw InvalidInput(violations.front().invariant + ": " + violations.front().detail);
    }
}

void require_schedule(const std::vector<double>& n_list, std::size_t min_size) {
    if (n_list.size() < min_size) {
        std::ostringstream msg;
        msg << "n_list needs at least " << min_size << " values";
        throw InvalidInput(msg.str());
    }
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (!(n_list[i] > 0.0)) throw InvalidInput("n_list values must be positive");
        if (i > 0 && !(n_list[i] > n_list[i - 1])) throw InvalidInput("n_list must be strictly increasing");
    }
}

LatticeSurface obstacle_surface(const ProblemSpec& spec) {
    const int n = spec.grid.n_steps;
    LatticeSurface s(SurfaceKind::Y, n, spec.lattice.size());
    for (int i = 0; i <= n; ++i) {
        const double t = spec.grid.t(i);
        for (int k = 0; k < spec.lattice.size(); ++k) s.at(i, k) = spec.obstacle(t, spec.lattice.x(k));
    }
    return s;
}

LadderRow make_row(const PenalizedSolution& ps) {
    LadderRow row;
    row.n = ps.n;
    row.sup_excess = ps.sup_excess;
    row.L_T_norm = ps.L_T_norm;
    row.K_T_norm = ps.K_T_norm;
    row.var_A = ps.L_T_norm + ps.K_T_norm;
    row.cauchy_gap = kNaN;
    row.max_abs_Y = ps.solution.Y.max_abs();
    return row;
}

}  // namespace

std::string to_string(SlopeStatus s) {
    switch (s) {
        case SlopeStatus::Fitted: return "fitted";
        case SlopeStatus::Exact: return "exact";
        case SlopeStatus::Undefined: return "undefined";
    }
    return "undefined";
}

PenalizedSolution solve_penalized(const ProblemSpec& spec, double n, const SolveOptions& options) {
    if (!(n >= 0.0)) throw InvalidInput("penalty level must be nonnegative");
    require_obstacle_problem(spec, n);

    const GExpectation op(spec);
    const auto xi = terminal_row(spec);
    const Penalty penalty{n, spec.obstacle};
    PenalizedSolution ps;
    ps.n = n;
    ps.grid = Grid{spec.grid, spec.lattice};
    ps.solution = solve_backward(op, xi, spec.driver, spec.lipschitz, &penalty, options);

    const int steps = spec.grid.n_steps;
    const int width = spec.lattice.size();
    const double ndt = n * spec.grid.dt();
    ps.L_increments = LatticeSurface(SurfaceKind::AIncrement, steps, width);
    LatticeSurface cost(SurfaceKind::Defect, steps, width);
    double excess = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double t = spec.grid.t(i);
        for (int k = 0; k < width; ++k) {
            const double over = std::max(ps.solution.Y.at(i, k) - spec.obstacle(t, spec.lattice.x(k)), 0.0);
            excess = std::max(excess, over);
            if (i < steps) {
                ps.L_increments.at(i, k) = -ndt * over;
                cost.at(i, k) = ndt * over;
            }
        }
    }
    ps.sup_excess = excess;
    ps.L_T_norm = controlled_accumulation(op, cost, cost);
    ps.K_T_norm = controlled_accumulation(op, ps.solution.defect_low, ps.solution.defect_high);
    return ps;
}

ProblemSpec refine_for_penalty(const ProblemSpec& spec, double n) {
    ProblemSpec work = spec;
    for (int guard = 0; !(work.grid.dt() * (work.lipschitz + n) < 0.5); ++guard) {
        if (guard > 30) throw InvalidInput("cannot refine the grid enough for this penalty level");
        work = refine_time_grid(work);
    }
    return work;
}

void fit_rate(PenalizationReport& report) {
    std::vector<std::pair<double, double>> pts;
    bool all_zero = true;
    for (const auto& r : report.rows) {
        if (r.sup_excess > 0.0) {
            all_zero = false;
            pts.emplace_back(std::log(r.n), std::log(r.sup_excess));
        }
    }
    report.slope.reset();
    if (all_zero) {
        report.slope_status = SlopeStatus::Exact;
        return;
    }
    if (pts.size() < 4) {
        report.slope_status = SlopeStatus::Undefined;
        return;
    }
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& [x, y] : pts) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    report.slope = sxy / sxx;
    report.slope_status = SlopeStatus::Fitted;
}

PenalizationReport rate_study(const ProblemSpec& spec, const std::vector<double>& n_list,
                              const SolveOptions& options) {
    require_schedule(n_list, 4);
    const ProblemSpec work = refine_for_penalty(spec, n_list.back());
    PenalizationReport report;
    report.grid = Grid{work.grid, work.lattice};
    std::optional<LatticeSurface> previous;
    for (double n : n_list) {
        PenalizedSolution ps = solve_penalized(work, n, options);
        if (previous) report.rows.back().cauchy_gap = max_abs_difference(*previous, ps.solution.Y);
        report.rows.push_back(make_row(ps));
        previous = std::move(ps.solution.Y);
    }
    fit_rate(report);
    report.converged = true;
    return report;
}

ReflectedSolution solve_reflected(const ProblemSpec& spec, const ReflectedOptions& options) {
    require_schedule(options.n_schedule, 1);
    if (!(options.tol > 0.0)) throw InvalidInput("tol must be positive");
    if (!spec.has_obstacle()) throw InvalidInput("solve_reflected needs an obstacle");

    ProblemSpec work = spec;
    PenalizationReport report;
    std::optional<PenalizedSolution> last;
    std::optional<LatticeSurface> previous_Y;
    bool converged = false;

    std::size_t idx = 0;
    while (idx < options.n_schedule.size()) {
        const double n = options.n_schedule[idx];
        if (!(work.grid.dt() * (work.lipschitz + n) < 0.5)) {
            // halve dt and rerun the ladder so every rung shares one grid
            work = refine_for_penalty(work, n);
            report.rows.clear();
            previous_Y.reset();
            idx = 0;
            continue;
        }
        PenalizedSolution ps = solve_penalized(work, n, options.solve);
        double gap = kNaN;
        if (previous_Y) {
            gap = max_abs_difference(*previous_Y, ps.solution.Y);
            report.rows.back().cauchy_gap = gap;
        }
        report.rows.push_back(make_row(ps));
        previous_Y = ps.solution.Y;
        last = std::move(ps);
        ++idx;
        if (last->sup_excess <= options.tol && std::isfinite(gap) && gap <= options.tol) {
            converged = true;
            break;
        }
    }
    report.grid = Grid{work.grid, work.lattice};
    report.converged = converged;
    fit_rate(report);

    const PenalizedSolution& ps = *last;
    const int steps = work.grid.n_steps;
    const int width = work.lattice.size();
    const double dt = work.grid.dt();
    const GExpectation op(work);

    ReflectedSolution rs;
    rs.spec = work;
    rs.n_final = ps.n;
    rs.sup_excess_final = ps.sup_excess;
    rs.penalized_Y = ps.solution.Y;
    rs.Z = ps.solution.Z;
    rs.obstacle = obstacle_surface(work);
    rs.Y = LatticeSurface(SurfaceKind::Y, steps, width);
    for (int i = 0; i <= steps; ++i) {
        for (int k = 0; k < width; ++k) rs.Y.at(i, k) = std::min(rs.penalized_Y.at(i, k), rs.obstacle.at(i, k));
    }

    rs.A_increments = LatticeSurface(SurfaceKind::AIncrement, steps, width);
    rs.A1_increments = LatticeSurface(SurfaceKind::AIncrement, steps, width);
    rs.A2_increments = LatticeSurface(SurfaceKind::AIncrement, steps, width);
    rs.defect_low = LatticeSurface(SurfaceKind::Defect, steps, width);
    rs.defect_high = LatticeSurface(SurfaceKind::Defect, steps, width);
    for (int i = 0; i < steps; ++i) {
        const double t = work.grid.t(i);
        const auto next = rs.Y.row(i + 1);
        for (int k = 0; k < width; ++k) {
            const double e_lo = op.expectation(next, k, Scenario::Low);
            const double e_hi = op.expectation(next, k, Scenario::High);
            const double estar = e_hi >= e_lo ? e_hi : e_lo;
            const double y = rs.Y.at(i, k);
            const double da = y - (estar + dt * work.f(t, work.lattice.x(k), y, rs.Z.at(i, k)));
            const double da2 = -ps.L_increments.at(i, k);
            rs.A_increments.at(i, k) = da;
            rs.A2_increments.at(i, k) = da2;
            rs.A1_increments.at(i, k) = da + da2;
            rs.defect_low.at(i, k) = estar - e_lo;
            rs.defect_high.at(i, k) = estar - e_hi;
        }
    }
    rs.report = std::move(report);
    const auto mc = martingale_condition_check(rs);
    rs.report.martingale_defect = mc.tolerance - mc.margin;
    const auto sk = skorokhod_check(rs);
    rs.report.skorokhod_residual = sk.tolerance - sk.margin;
    return rs;
}

CheckResult monotonicity_check(const ProblemSpec& spec, const std::vector<double>& n_list,
                               const SolveOptions& options) {
    require_schedule(n_list, 1);
    const ProblemSpec work = refine_for_penalty(spec, n_list.back());
    CheckResult out;
    out.name = "monotonicity_in_n";
    out.anchor = "comparison theorem applied to drivers decreasing in n";
    out.tolerance = 0.0;

    double margin = std::numeric_limits<double>::infinity();
    std::optional<LatticeSurface> previous;
    LatticeSurface last;
    for (double n : n_list) {
        PenalizedSolution ps = solve_penalized(work, n, options);
        if (previous) margin = std::min(margin, min_difference(*previous, ps.solution.Y));
        previous = ps.solution.Y;
        last = std::move(ps.solution.Y);
    }
    // against the clipped limit min(Y^n_max, S)
    const auto s = obstacle_surface(work);
    LatticeSurface limit = last;
    for (int i = 0; i <= limit.n_steps(); ++i) {
        for (int k = 0; k < limit.width(); ++k) limit.at(i, k) = std::min(last.at(i, k), s.at(i, k));
    }
    margin = std::min(margin, min_difference(last, limit));
    out.margin = margin;
    out.pass = margin >= 0.0;
    std::ostringstream msg;
    msg << n_list.size() << " rungs on " << work.grid.n_steps << " steps; min(Y^n - Y^n') = " << margin;
    out.detail = msg.str();
    return out;
}

CheckResult martingale_condition_check(const ReflectedSolution& rs) {
    constexpr double kTolMono = 1e-12;
    const int steps = rs.Y.n_steps();
    const int width = rs.Y.width();
    double worst_increase = -std::numeric_limits<double>::infinity();
    double worst_defect = 0.0;
    for (int i = 0; i < steps; ++i) {
        for (int k = 0; k < width; ++k) {
            const double gap = rs.obstacle.at(i, k) - rs.Y.at(i, k);
            const double da = rs.A_increments.at(i, k);
            // scenario increments of A: residual plus the K-part carried by each scenario
            const double dm_lo = -gap * (da + rs.defect_low.at(i, k));
            const double dm_hi = -gap * (da + rs.defect_high.at(i, k));
            const double sup = std::max(dm_lo, dm_hi);
            worst_increase = std::max(worst_increase, sup);
            worst_defect = std::max(worst_defect, std::abs(sup));
        }
    }
    const double tol_mart = 5.0 * rs.sup_excess_final;
    CheckResult out;
    out.name = "martingale_condition";
    out.anchor = "-int (S-Y) dA is a decreasing G-martingale";
    out.tolerance = tol_mart;
    out.margin = tol_mart - worst_defect;
    out.pass = worst_increase <= kTolMono && worst_defect <= tol_mart;
    std::ostringstream msg;
    msg << "max increment " << worst_increase << " (tol " << kTolMono << "); G-martingale defect " << worst_defect
        << " (tol " << tol_mart << ")";
    out.detail = msg.str();
    return out;
}

CheckResult skorokhod_check(const ReflectedSolution& rs) {
    const ProblemSpec& spec = rs.spec;
    const int steps = spec.grid.n_steps;
    const int width = spec.lattice.size();
    LatticeSurface cost(SurfaceKind::Defect, steps, width);
    for (int i = 0; i < steps; ++i) {
        for (int k = 0; k < width; ++k) {
            const double gap = rs.obstacle.at(i, k) - rs.penalized_Y.at(i, k);
            cost.at(i, k) = std::abs(gap * rs.A2_increments.at(i, k));
        }
    }
    const GExpectation op(spec);
    const double residual = controlled_accumulation(op, cost, cost);
    const double bound = spec.grid.horizon * rs.n_final * rs.sup_excess_final * rs.sup_excess_final;
    CheckResult out;
    out.name = "skorokhod_residual";
    out.anchor = "int (S-Y) dA2 = 0";
    out.tolerance = bound;
    out.margin = bound - residual;
    out.pass = residual <= bound * (1.0 + 1e-12) + 1e-300;
    std::ostringstream msg;
    msg << "E|sum (S-Y^n) dA2| = " << residual << " vs T n sup_excess^2 = " << bound;
    out.detail = msg.str();
    return out;
}

CheckResult uniform_bound_check(const ProblemSpec& spec, const PenalizationReport& report) {
    ProblemSpec on_grid = spec;
    on_grid.grid = report.grid.time;
    on_grid.lattice = report.grid.lattice;
    double reference = 0.0;
    for (int k = 0; k < on_grid.lattice.size(); ++k) {
        reference = std::max(reference, std::abs(on_grid.terminal(on_grid.lattice.x(k))));
    }
    if (on_grid.has_obstacle()) reference = std::max(reference, obstacle_surface(on_grid).max_abs());
    reference = std::max(reference, solve_gbsde(on_grid).Y.max_abs());
    const double bound = reference + 1.0;

    double worst = 0.0;
    for (const auto& r : report.rows) worst = std::max(worst, r.max_abs_Y);
    CheckResult out;
    out.name = "uniform_bound";
    out.anchor = "sup_t |Y^n_t| bounded independently of n";
    out.tolerance = bound;
    out.margin = bound - worst;
    out.pass = worst <= bound;
    std::ostringstream msg;
    msg << "max |Y^n| = " << worst << " vs max(|xi|,|S|,|Y^G|) + 1 = " << bound;
    out.detail = msg.str();
    return out;
}

CheckResult variation_bound_check(const PenalizationReport& report) {
    CheckResult out;
    out.name = "variation_bound";
    out.anchor = "E|L^n_T| and total variation of A^n bounded independently of n";
    if (report.rows.empty()) {
        out.detail = "empty ladder";
        return out;
    }
    const auto& first = report.rows.front();
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& r : report.rows) {
        margin = std::min(margin, 2.0 * first.L_T_norm + 1.0 - r.L_T_norm);
        margin = std::min(margin, 2.0 * first.K_T_norm + 1.0 - r.K_T_norm);
        margin = std::min(margin, 2.0 * first.var_A + 1.0 - r.var_A);
    }
    out.tolerance = 1.0;
    out.margin = margin;
    out.pass = margin >= 0.0;
    std::ostringstream msg;
    msg << "first rung n=" << first.n << ": L_T=" << first.L_T_norm << " K_T=" << first.K_T_norm
        << " var_A=" << first.var_A;
    out.detail = msg.str();
    return out;
}

CheckResult cauchy_check(const PenalizationReport& report) {
    CheckResult out;
    out.name = "cauchy_gaps";
    out.anchor = "Y^n is Cauchy";
    out.tolerance = 0.0;
    std::vector<double> gaps;
    bool started = false;
    for (const auto& r : report.rows) {
        if (r.sup_excess < 0.1) started = true;
        if (started && std::isfinite(r.cauchy_gap)) gaps.push_back(r.cauchy_gap);
    }
    double margin = std::numeric_limits<double>::infinity();
    bool pass = true;
    for (std::size_t i = 1; i < gaps.size(); ++i) {
        const double drop = gaps[i - 1] - gaps[i];
        const bool both_zero = gaps[i - 1] == 0.0 && gaps[i] == 0.0;
        if (!(drop > 0.0) && !both_zero) pass = false;
        margin = std::min(margin, drop);
    }
    if (gaps.size() < 2) margin = 0.0;
    out.pass = pass;
    out.margin = margin;
    std::ostringstream msg;
    msg << gaps.size() << " gaps in scope";
    for (double g : gaps) msg << ' ' << g;
    out.detail = msg.str();
    return out;
}

CheckResult rate_slope_check(const PenalizationReport& report, double lo, double hi) {
    CheckResult out;
    out.name = "penalization_rate";
    out.anchor = "sup (Y^n - S)^+ <= C / n";
    out.tolerance = 0.5 * (hi - lo);
    bool monotone = true;
    for (std::size_t r = 1; r < report.rows.size(); ++r) {
        if (report.rows[r].sup_excess > report.rows[r - 1].sup_excess) monotone = false;
    }
    std::ostringstream detail;
    if (report.slope_status != SlopeStatus::Fitted) {
        out.pass = false;
        out.margin = kNaN;
        detail << "slope " << to_string(report.slope_status) << ": fewer than 4 rungs have a positive sup_excess";
        if (report.slope_status == SlopeStatus::Exact) detail << " (the obstacle never binds)";
    } else {
        const double s = *report.slope;
        out.margin = std::min(s - lo, hi - s);
        out.pass = out.margin >= 0.0 && monotone;
        detail << "slope=" << s << " band=[" << lo << ", " << hi << "]";
    }
    detail << (monotone ? " sup_excess nonincreasing" : " sup_excess increases somewhere");
    out.detail = detail.str();
    return out;
}

}  // namespace gbsde
