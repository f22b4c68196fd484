#include "gbsde/model.hpp"
#include "gbsde/penalization.hpp"
#include "gbsde/runner.hpp"
#include "gbsde/solver.hpp"
#include "gbsde/sublinear.hpp"

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace gbsde;

namespace {

/// Rows first_step..n of a surface as a (rows, width) array.
py::array_t<double> to_array(const LatticeSurface& s) {
    const int rows = s.n_steps() - s.first_step() + 1;
    py::array_t<double> out({rows, s.width()});
    auto view = out.mutable_unchecked<2>();
    for (int i = 0; i < rows; ++i) {
        for (int k = 0; k < s.width(); ++k) view(i, k) = s.at(s.first_step() + i, k);
    }
    return out;
}

py::array_t<double> nodes(const SpatialLattice& lattice) {
    py::array_t<double> out(lattice.size());
    auto view = out.mutable_unchecked<1>();
    for (int k = 0; k < lattice.size(); ++k) view(k) = lattice.x(k);
    return out;
}

// Python callables may only run on the calling thread.
struct SingleThread {
    int saved = thread_count();
    SingleThread() { set_thread_count(1); }
    ~SingleThread() { set_thread_count(saved); }
};

ProblemSpec make_spec(double sigma_lo_sq, double sigma_hi_sq, double horizon, int n_steps, double coverage,
                      TerminalFn terminal, DriverFn driver, double lipschitz, ObstacleFn obstacle) {
    ProblemSpec spec;
    spec.band = {sigma_lo_sq, sigma_hi_sq};
    const Grid g = build_grid(spec.band, horizon, n_steps, coverage);
    spec.grid = g.time;
    spec.lattice = g.lattice;
    spec.terminal = std::move(terminal);
    spec.driver = std::move(driver);
    spec.lipschitz = lipschitz;
    spec.obstacle = std::move(obstacle);
    return spec;
}

py::dict report_dict(const PenalizationReport& r) {
    py::list rows;
    for (const auto& row : r.rows) {
        py::dict d;
        d["n"] = row.n;
        d["sup_excess"] = row.sup_excess;
        d["L_T_norm"] = row.L_T_norm;
        d["K_T_norm"] = row.K_T_norm;
        d["var_A"] = row.var_A;
        d["cauchy_gap"] = row.cauchy_gap;
        d["max_abs_Y"] = row.max_abs_Y;
        rows.append(d);
    }
    py::dict out;
    out["rows"] = rows;
    out["slope"] = r.slope ? py::cast(*r.slope) : py::none();
    out["slope_status"] = to_string(r.slope_status);
    out["converged"] = r.converged;
    return out;
}

}  // namespace

PYBIND11_MODULE(_gbsde, m) {
    m.doc() = "Lattice solvers for G-BSDEs and reflected G-BSDEs with an upper obstacle";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<PicardDivergence>(m, "PicardDivergence", PyExc_RuntimeError);

    m.def(
        "g_expectation",
        [](double sigma_lo_sq, double sigma_hi_sq, double horizon, int n_steps, double coverage,
           const TerminalFn& terminal) {
            SingleThread guard;
            const ProblemSpec spec =
                make_spec(sigma_lo_sq, sigma_hi_sq, horizon, n_steps, coverage, terminal, {}, 0.0, {});
            const GExpectation op(spec);
            const std::vector<double> row = terminal_row(spec);
            return op.expect(row);
        },
        py::arg("sigma_lo_sq"), py::arg("sigma_hi_sq"), py::arg("horizon"), py::arg("n_steps"),
        py::arg("coverage") = 6.0, py::arg("terminal"),
        "E[terminal(B_T)] under the G-expectation, evaluated on the trinomial lattice.");

    m.def(
        "solve_gbsde",
        [](double sigma_lo_sq, double sigma_hi_sq, double horizon, int n_steps, const TerminalFn& terminal,
           const DriverFn& driver, double lipschitz, double coverage) {
            SingleThread guard;
            const ProblemSpec spec =
                make_spec(sigma_lo_sq, sigma_hi_sq, horizon, n_steps, coverage, terminal, driver, lipschitz, {});
            const GBsdeSolution sol = solve_gbsde(spec);
            py::dict out;
            out["x"] = nodes(spec.lattice);
            out["Y"] = to_array(sol.Y);
            out["Z"] = to_array(sol.Z);
            out["root"] = sol.root();
            return out;
        },
        py::arg("sigma_lo_sq"), py::arg("sigma_hi_sq"), py::arg("horizon"), py::arg("n_steps"), py::arg("terminal"),
        py::arg("driver") = DriverFn{}, py::arg("lipschitz") = 0.0, py::arg("coverage") = 6.0,
        "Solves the G-BSDE; returns x, Y, Z (rows are time steps) and Y at the root.");

    m.def(
        "solve_reflected",
        [](double sigma_lo_sq, double sigma_hi_sq, double horizon, int n_steps, const TerminalFn& terminal,
           const ObstacleFn& obstacle, const DriverFn& driver, double lipschitz, std::vector<double> n_schedule,
           double tol, double coverage) {
            SingleThread guard;
            const ProblemSpec spec = make_spec(sigma_lo_sq, sigma_hi_sq, horizon, n_steps, coverage, terminal, driver,
                                               lipschitz, obstacle);
            ReflectedOptions options;
            options.n_schedule = std::move(n_schedule);
            options.tol = tol;
            const ReflectedSolution rs = solve_reflected(spec, options);
            py::dict out;
            out["x"] = nodes(rs.spec.lattice);
            out["n_steps"] = rs.spec.grid.n_steps;
            out["Y"] = to_array(rs.Y);
            out["Z"] = to_array(rs.Z);
            out["A"] = to_array(rs.A_increments);
            out["penalized_Y"] = to_array(rs.penalized_Y);
            out["n_final"] = rs.n_final;
            out["sup_excess"] = rs.sup_excess_final;
            out["root"] = rs.Y.at(0, rs.Y.width() / 2);
            out["report"] = report_dict(rs.report);
            return out;
        },
        py::arg("sigma_lo_sq"), py::arg("sigma_hi_sq"), py::arg("horizon"), py::arg("n_steps"), py::arg("terminal"),
        py::arg("obstacle"), py::arg("driver") = DriverFn{}, py::arg("lipschitz") = 0.0,
        py::arg("n_schedule") = std::vector<double>{4, 8, 16, 32, 64, 128, 256, 512}, py::arg("tol") = 1e-3,
        py::arg("coverage") = 6.0, "Reflected G-BSDE below an upper obstacle via the penalization ladder.");

    m.def(
        "rate_study",
        [](double sigma_lo_sq, double sigma_hi_sq, double horizon, int n_steps, const TerminalFn& terminal,
           const ObstacleFn& obstacle, const std::vector<double>& n_list, const DriverFn& driver, double lipschitz,
           double coverage) {
            SingleThread guard;
            const ProblemSpec spec = make_spec(sigma_lo_sq, sigma_hi_sq, horizon, n_steps, coverage, terminal, driver,
                                               lipschitz, obstacle);
            return report_dict(rate_study(spec, n_list));
        },
        py::arg("sigma_lo_sq"), py::arg("sigma_hi_sq"), py::arg("horizon"), py::arg("n_steps"), py::arg("terminal"),
        py::arg("obstacle"), py::arg("n_list"), py::arg("driver") = DriverFn{}, py::arg("lipschitz") = 0.0,
        py::arg("coverage") = 6.0, "Penalization ladder diagnostics and the fitted log-log slope.");

    m.def(
        "run",
        [](const std::string& command, const std::string& config, const std::string& out_dir, int threads,
           std::optional<std::uint64_t> seed) {
            std::ostringstream log;
            int status = 0;
            {
                py::gil_scoped_release release;
                status = run(RunOptions{command, config, out_dir, threads, seed}, log);
            }
            return py::make_tuple(status, log.str());
        },
        py::arg("command"), py::arg("config"), py::arg("out_dir"), py::arg("threads") = 1,
        py::arg("seed") = std::nullopt, "Runs a CLI subcommand; returns (exit status, log text).");

    m.attr("commands") = run_commands();
}
