#include "gbsde/runner.hpp"

#include "gbsde/comparison.hpp"
#include "gbsde/config.hpp"
#include "gbsde/montecarlo.hpp"
#include "gbsde/oracle.hpp"
#include "gbsde/penalization.hpp"
#include "gbsde/solver.hpp"
#include "gbsde/sublinear.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace gbsde {

namespace {

using json = nlohmann::ordered_json;

const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names{
        "obstacle_condition",  "reflected_converged", "martingale_condition",        "skorokhod_residual",
        "uniform_bound",       "variation_bound",     "cauchy_gaps",                 "monotonicity_in_n",
        "penalization_rate",   "comparison",          "variant_comparison",          "linearized_duality_identity",
        "linearized_duality_inequality", "oracle_agreement", "maximality",          "stopping_certification",
        "representation"};
    return names;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const CheckResult& c) {
    json j;
    j["name"] = c.name;
    j["pass"] = c.pass;
    j["margin"] = number_or_null(c.margin);
    j["tolerance"] = number_or_null(c.tolerance);
    j["paper_anchor"] = c.anchor;
    j["detail"] = c.detail;
    return j;
}

class Runner {
public:
    Runner(ExperimentConfig cfg, std::filesystem::path out, std::ostream& log)
        : cfg_(std::move(cfg)), out_(std::move(out)), log_(log) {}

    bool dispatch(const std::string& command) {
        if (command == "expect") return finish("expect", expect());
        if (command == "bsde") return finish("bsde", bsde());
        if (command == "reflect") return finish("reflect", reflect());
        if (command == "rate-study") return finish("rate_study", rate());
        if (command == "compare") return finish("compare", compare());
        if (command == "xcheck") return finish("xcheck", xcheck());
        if (command == "mc-rep") return finish("mc_rep", mc_rep());
        if (command == "all") return all();
        throw ConfigError("<command>", "unknown subcommand '" + command + "'");
    }

private:
    json expect() {
        const GExpectation op(cfg_.spec);
        const auto surface = op.conditional(terminal_row(cfg_.spec));
        write_surface("expect.csv", surface, cfg_.spec);
        json r;
        r["terminal"] = cfg_.terminal.name;
        r["value"] = surface.at(0, cfg_.spec.lattice.center());
        r["n_steps"] = cfg_.spec.grid.n_steps;
        r["lattice_width"] = cfg_.spec.lattice.size();
        return r;
    }

    json bsde() {
        const auto sol = solve_gbsde(cfg_.spec);
        write_surface("bsde_Y.csv", sol.Y, cfg_.spec);
        write_surface("bsde_Z.csv", sol.Z, cfg_.spec);
        json r;
        r["terminal"] = cfg_.terminal.name;
        r["Y0"] = sol.root();
        r["Z0"] = sol.Z.at(0, cfg_.spec.lattice.center());
        r["max_abs_Y"] = sol.Y.max_abs();
        return r;
    }

    const ReflectedSolution& reflected() {
        if (!cfg_.spec.has_obstacle()) throw ConfigError("problem.obstacle", "this subcommand needs an obstacle");
        if (!reflected_) reflected_ = solve_reflected(cfg_.spec, cfg_.reflected);
        return *reflected_;
    }

    std::vector<double> schedule_to_final(const ReflectedSolution& rs) const {
        std::vector<double> out;
        for (double n : cfg_.reflected.n_schedule) {
            if (n <= rs.n_final) out.push_back(n);
        }
        return out;
    }

    static json ladder_json(const PenalizationReport& report) {
        json rows = json::array();
        for (const auto& r : report.rows) {
            json row;
            row["n"] = r.n;
            row["sup_excess"] = r.sup_excess;
            row["L_T_norm"] = r.L_T_norm;
            row["K_T_norm"] = r.K_T_norm;
            row["var_A"] = r.var_A;
            row["cauchy_gap"] = number_or_null(r.cauchy_gap);
            row["max_abs_Y"] = r.max_abs_Y;
            rows.push_back(row);
        }
        return rows;
    }

    json reflect() {
        const ReflectedSolution& rs = reflected();
        write_surface("reflect_Y.csv", rs.Y, rs.spec);
        write_surface("reflect_Z.csv", rs.Z, rs.spec);
        write_surface("reflect_A.csv", rs.A_increments, rs.spec);
        write_surface("reflect_penalized_Y.csv", rs.penalized_Y, rs.spec);

        CheckResult obstacle;
        obstacle.name = "obstacle_condition";
        obstacle.anchor = "Y <= S after the min-clip";
        obstacle.margin = min_difference(rs.obstacle, rs.Y);
        obstacle.tolerance = 0.0;
        obstacle.pass = obstacle.margin >= 0.0;
        obstacle.detail = "min(S - Y) over all nodes";
        add(obstacle);

        CheckResult conv;
        conv.name = "reflected_converged";
        conv.anchor = "penalized solutions converge to the reflected solution";
        conv.tolerance = cfg_.reflected.tol;
        conv.margin = cfg_.reflected.tol - rs.sup_excess_final;
        conv.pass = rs.report.converged;
        std::ostringstream d;
        d << "n_final=" << rs.n_final << " sup_excess=" << rs.sup_excess_final << " n_steps=" << rs.spec.grid.n_steps;
        conv.detail = d.str();
        add(conv);

        add(martingale_condition_check(rs));
        add(skorokhod_check(rs));
        add(uniform_bound_check(rs.spec, rs.report));
        add(variation_bound_check(rs.report));
        add(cauchy_check(rs.report));
        add(monotonicity_check(rs.spec, schedule_to_final(rs)));

        json r;
        r["n_final"] = rs.n_final;
        r["sup_excess_final"] = rs.sup_excess_final;
        r["converged"] = rs.report.converged;
        r["n_steps"] = rs.spec.grid.n_steps;
        r["lattice_width"] = rs.spec.lattice.size();
        r["Y0"] = rs.Y.at(0, rs.spec.lattice.center());
        r["martingale_defect"] = rs.report.martingale_defect;
        r["skorokhod_residual"] = rs.report.skorokhod_residual;
        r["ladder"] = ladder_json(rs.report);
        return r;
    }

    json rate() {
        if (!cfg_.spec.has_obstacle()) throw ConfigError("problem.obstacle", "rate-study needs an obstacle");
        const auto report = rate_study(cfg_.spec, cfg_.n_list);
        const auto path = out_ / "rate_study.csv";
        std::ofstream csv(path);
        csv << "n,sup_excess,L_T_norm,K_T_norm,var_A,cauchy_gap\n";
        char buf[256];
        for (const auto& r : report.rows) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.n, r.sup_excess, r.L_T_norm,
                          r.K_T_norm, r.var_A, r.cauchy_gap);
            csv << buf;
        }
        add(rate_slope_check(report));
        json r;
        r["slope"] = report.slope ? json(*report.slope) : json(nullptr);
        r["slope_status"] = to_string(report.slope_status);
        r["n_steps"] = report.grid.time.n_steps;
        r["ladder"] = ladder_json(report);
        return r;
    }

    json compare() {
        ProblemSpec lower = cfg_.spec;
        lower.terminal = cfg_.compare.lower_terminal.fn;
        lower.driver = cfg_.compare.lower_driver;
        add(comparison_check(cfg_.spec, lower));
        const auto variant = variant_compare(cfg_.spec, SubmartingalePerturbation{cfg_.compare.rate_a},
                                             cfg_.compare.lower_terminal.fn, cfg_.compare.lower_driver);
        add(variant.check);
        json r;
        r["upper_terminal"] = cfg_.terminal.name;
        r["lower_terminal"] = cfg_.compare.lower_terminal.name;
        r["rate_a"] = cfg_.compare.rate_a;
        r["Y0_upper"] = variant.second.root();
        r["Y0_perturbed_lower"] = variant.first.root();
        if (cfg_.compare.duality) {
            const DualityConfig& dc = *cfg_.compare.duality;
            ProblemSpec classical = cfg_.spec;
            classical.band = VolatilityBand{dc.v, dc.v};
            const Grid g = build_grid(classical.band, cfg_.spec.grid.horizon, cfg_.spec.grid.n_steps);
            classical.grid = g.time;
            classical.lattice = g.lattice;
            classical.obstacle = {};
            LatticeSurface K(SurfaceKind::Y, g.time.n_steps, g.lattice.size());
            for (int i = 0; i <= g.time.n_steps; ++i) {
                for (int k = 0; k < g.lattice.size(); ++k) K.at(i, k) = dc.K_rate * g.time.t(i);
            }
            const auto dual = linearized_duality_check(classical, dc.coeffs, K);
            add(dual.identity);
            add(dual.inequality);
            r["duality_Y0_bsde"] = dual.bsde_Y.at(0, g.lattice.center());
            r["duality_Y0_dual"] = dual.dual_Y.at(0, g.lattice.center());
        }
        return r;
    }

    json xcheck() {
        const ReflectedSolution& rs = reflected();
        const auto fd = solve_obstacle_fd(rs.spec);
        write_surface("xcheck_fd_Y.csv", fd, rs.spec);
        const double diff = max_abs_difference(rs.Y, fd);
        CheckResult agree;
        agree.name = "oracle_agreement";
        agree.anchor = "penalized limit equals the projection solution of the obstacle problem";
        agree.tolerance = std::max(2.0 * rs.sup_excess_final, 1e-3);
        agree.margin = agree.tolerance - diff;
        agree.pass = diff <= agree.tolerance;
        std::ostringstream d1;
        d1 << "max |Y - Y_fd| = " << diff;
        agree.detail = d1.str();
        add(agree);

        double ladder_margin = std::numeric_limits<double>::infinity();
        for (double n : schedule_to_final(rs)) {
            const auto ps = solve_penalized(rs.spec, n);
            ladder_margin = std::min(ladder_margin, min_difference(ps.solution.Y, fd) + 1e-12);
        }
        const double limit_margin = min_difference(rs.Y, fd) + 1e-3;
        CheckResult maximal;
        maximal.name = "maximality";
        maximal.anchor = "the penalized limit is the maximal solution";
        maximal.tolerance = 1e-12;
        maximal.margin = std::min(ladder_margin, limit_margin);
        maximal.pass = ladder_margin >= 0.0 && limit_margin >= 0.0;
        std::ostringstream d2;
        d2 << "min(Y^n - Y_fd) + 1e-12 = " << ladder_margin << "; min(Y - Y_fd) + 1e-3 = " << limit_margin;
        maximal.detail = d2.str();
        add(maximal);

        json r;
        r["max_abs_difference"] = diff;
        r["sup_excess_final"] = rs.sup_excess_final;
        r["n_final"] = rs.n_final;
        r["n_steps"] = rs.spec.grid.n_steps;

        if (cfg_.spec.band.degenerate()) {
            const auto dp = optimal_stopping_oracle(cfg_.spec);
            const auto fd_coarse = solve_obstacle_fd(cfg_.spec);
            double err = max_abs_difference(dp.value, fd_coarse);
            std::ostringstream d3;
            d3 << "max |DP - projection| = " << err;
            double tol = 1e-10;
            if (cfg_.spec.grid.n_steps <= 12) {
                const double brute = brute_force_path_tree(cfg_.spec);
                const double root = dp.value.at(0, cfg_.spec.lattice.center());
                d3 << "; |DP - path enumeration| = " << std::abs(brute - root);
                err = std::max(err, std::abs(brute - root));
            }
            CheckResult stop;
            stop.name = "stopping_certification";
            stop.anchor = "upper obstacle value = inf over stopping times (classical band)";
            stop.tolerance = tol;
            stop.margin = tol - err;
            stop.pass = err <= tol;
            stop.detail = d3.str();
            add(stop);
            r["stopping_value"] = dp.value.at(0, cfg_.spec.lattice.center());
        }
        return r;
    }

    std::vector<VolatilityPolicy> policy_family(const ProblemSpec& payoff_spec) const {
        std::vector<VolatilityPolicy> out;
        const VolatilityBand& band = cfg_.spec.band;
        if (cfg_.mc.policies.empty()) {
            out.push_back(VolatilityPolicy::constant(band.sigma_lo_sq));
            out.push_back(VolatilityPolicy::constant(band.sigma_hi_sq));
            out.push_back(VolatilityPolicy::feedback(lattice_convexity_indicator(payoff_spec), "lattice feedback"));
            return out;
        }
        for (const auto& p : cfg_.mc.policies) {
            const std::string kind = p.at("kind").get<std::string>();
            if (kind == "constant") {
                out.push_back(VolatilityPolicy::constant(p.at("v").get<double>()));
            } else if (kind == "feedback") {
                out.push_back(VolatilityPolicy::feedback(lattice_convexity_indicator(payoff_spec), "lattice feedback"));
            } else {
                out.push_back(VolatilityPolicy::time_table(p.at("rates").get<std::vector<double>>()));
            }
        }
        return out;
    }

    json mc_rep() {
        json payoffs = json::array();
        for (const auto& payoff : cfg_.mc.payoffs) {
            ProblemSpec ps = cfg_.spec;
            ps.terminal = payoff.fn;
            const double lattice = g_expectation(GExpectation(ps), terminal_row(ps));
            const auto family = policy_family(ps);
            const auto search =
                sup_over_policies(payoff.fn, ps.band, ps.grid, family, cfg_.mc.n_paths, cfg_.mc.seed);
            auto check = representation_check("representation", lattice, search, payoff.convex);
            check.detail = payoff.name + ": " + check.detail;
            add(check);
            json entry;
            entry["payoff"] = payoff.name;
            entry["convex"] = payoff.convex;
            entry["lattice_value"] = lattice;
            json pol = json::array();
            for (std::size_t q = 0; q < family.size(); ++q) {
                json e;
                e["policy"] = family[q].label;
                e["estimate"] = search.values[q].estimate;
                e["std_error"] = search.values[q].std_error;
                pol.push_back(e);
            }
            entry["policies"] = pol;
            entry["best_policy"] = family[search.best].label;
            payoffs.push_back(entry);
        }
        json r;
        r["n_paths"] = cfg_.mc.n_paths;
        r["seed"] = cfg_.mc.seed;
        r["payoffs"] = payoffs;
        return r;
    }

    bool all() {
        bool pass = true;
        json summary = json::array();
        auto step = [&](const std::string& command) {
            const bool ok = dispatch(command);
            pass = pass && ok;
            json e;
            e["command"] = command;
            e["pass"] = ok;
            summary.push_back(e);
        };
        step("expect");
        step("bsde");
        if (cfg_.spec.has_obstacle()) {
            step("reflect");
            step("rate-study");
            step("xcheck");
        }
        step("compare");
        step("mc-rep");
        json report;
        report["command"] = "all";
        report["subcommands"] = summary;
        report["pass"] = pass;
        write_json("all.json", report);
        return pass;
    }

    void add(CheckResult c) {
        if (!cfg_.checks.empty() && std::find(cfg_.checks.begin(), cfg_.checks.end(), c.name) == cfg_.checks.end()) {
            return;
        }
        checks_.push_back(std::move(c));
    }

    bool finish(const std::string& name, json results) {
        json report;
        report["command"] = name;
        report["results"] = std::move(results);
        json checks = json::array();
        bool pass = true;
        for (const auto& c : checks_) {
            checks.push_back(to_json(c));
            pass = pass && c.pass;
            log_ << (c.pass ? "PASS " : "FAIL ") << name << "/" << c.name << ": " << c.detail << "\n";
        }
        report["checks"] = checks;
        report["pass"] = pass;
        checks_.clear();
        write_json(name + ".json", report);
        return pass;
    }

    void write_json(const std::string& file, const json& j) {
        std::ofstream out(out_ / file);
        out << j.dump(2) << "\n";
        if (!out) throw std::runtime_error("cannot write " + (out_ / file).string());
    }

    void write_surface(const std::string& file, const LatticeSurface& s, const ProblemSpec& spec) {
        const int n = s.n_steps();
        int stride = cfg_.time_stride;
        if (stride <= 0) stride = std::max(1, (n + 199) / 200);
        std::ofstream out(out_ / file);
        out << "t,x,value\n";
        char buf[96];
        auto emit = [&](int i) {
            const double t = spec.grid.t(i);
            for (int k = 0; k < s.width(); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t, spec.lattice.x(k), s.at(i, k));
                out << buf;
            }
        };
        const int last = s.kind() == SurfaceKind::Y ? n : n - 1;
        for (int i = s.first_step(); i <= last; i += stride) emit(i);
        if ((last - s.first_step()) % stride != 0) emit(last);
        if (!out) throw std::runtime_error("cannot write " + (out_ / file).string());
    }

    ExperimentConfig cfg_;
    std::filesystem::path out_;
    std::ostream& log_;
    std::vector<CheckResult> checks_;
    std::optional<ReflectedSolution> reflected_;
};

}  // namespace

const std::vector<std::string>& run_commands() {
    static const std::vector<std::string> commands{"expect", "bsde",   "reflect", "rate-study",
                                                   "compare", "xcheck", "mc-rep",  "all"};
    return commands;
}

int run(const RunOptions& options, std::ostream& log) {
    try {
        const auto& commands = run_commands();
        if (std::find(commands.begin(), commands.end(), options.command) == commands.end()) {
            throw ConfigError("<command>", "unknown subcommand '" + options.command + "'");
        }
        ExperimentConfig cfg = load_config(options.config_path);
        for (std::size_t i = 0; i < cfg.checks.size(); ++i) {
            const auto& known = known_checks();
            if (std::find(known.begin(), known.end(), cfg.checks[i]) == known.end()) {
                throw ConfigError("checks[" + std::to_string(i) + "]", "unknown check '" + cfg.checks[i] + "'");
            }
        }
        if (options.seed) cfg.mc.seed = *options.seed;
        if (options.threads < 1) throw ConfigError("--threads", "must be >= 1");
        set_thread_count(options.threads);
        std::filesystem::create_directories(options.out_dir);
        Runner runner(std::move(cfg), options.out_dir, log);
        return runner.dispatch(options.command) ? 0 : 1;
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidInput& e) {
        log << "input error: " << e.what() << "\n";
        return 2;
    } catch (const PicardDivergence& e) {
        log << "solver error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace gbsde
