#include "gbsde/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

namespace gbsde {

namespace {

// Explicit step shared by both finite-difference oracles: u~ = u + dt [G(D2 u) + f(t, x, u, D u)].
void explicit_step(const ProblemSpec& spec, int i, std::span<const double> next, std::span<double> out,
                   double ghost_low, double ghost_high) {
    const int width = spec.lattice.size();
    const double h = spec.lattice.spacing;
    const double dt = spec.grid.dt();
    const double t = spec.grid.t(i);
    const bool dirichlet = spec.lattice.boundary == BoundaryMode::DirichletTerminalExtension;
    for (int k = 0; k < width; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const double u = next[uk];
        double second = 0.0;
        if (k > 0 && k < width - 1) {
            second = (next[uk + 1] - 2.0 * u + next[uk - 1]) / (h * h);
        } else if (dirichlet) {
            const double below = k == 0 ? ghost_low : next[uk - 1];
            const double above = k == width - 1 ? ghost_high : next[uk + 1];
            second = (above - 2.0 * u + below) / (h * h);
        }
        double grad = 0.0;
        if (k == 0) {
            grad = (next[1] - next[0]) / h;
        } else if (k == width - 1) {
            grad = (next[uk] - next[uk - 1]) / h;
        } else {
            grad = (next[uk + 1] - next[uk - 1]) / (2.0 * h);
        }
        out[uk] = u + dt * (spec.band.G(second) + spec.f(t, spec.lattice.x(k), u, grad));
    }
}

void require_cfl(const ProblemSpec& spec) {
    const double h = spec.lattice.spacing;
    if (spec.band.sigma_hi_sq * spec.grid.dt() > h * h * (1.0 + 1e-12)) {
        throw InvalidInput("finite-difference oracle: CFL violated (sigma_hi_sq*dt > h^2)");
    }
}

std::pair<double, double> ghosts(const ProblemSpec& spec) {
    if (spec.lattice.boundary != BoundaryMode::DirichletTerminalExtension) return {0.0, 0.0};
    return {spec.terminal(spec.lattice.x(-1)), spec.terminal(spec.lattice.x(spec.lattice.size()))};
}

struct ClassicalTree {
    double p = 0.0;   // each side
    double pm = 1.0;  // stay
};

ClassicalTree classical_weights(const ProblemSpec& spec) {
    if (!spec.band.degenerate()) throw InvalidInput("stopping oracle needs sigma_lo_sq == sigma_hi_sq");
    if (!spec.has_obstacle()) throw InvalidInput("stopping oracle needs an obstacle");
    double r = spec.band.sigma_hi_sq * spec.grid.dt() / (spec.lattice.spacing * spec.lattice.spacing);
    if (r > 1.0 && r <= 1.0 + 1e-12) r = 1.0;
    if (r > 1.0) throw InvalidInput("stopping oracle: CFL violated");
    return {0.5 * r, 1.0 - r};
}

// Moves from offset j: (target offset, probability); clamped boundary nodes stay put.
std::vector<std::pair<int, double>> moves(const ProblemSpec& spec, const ClassicalTree& w, int j) {
    const int J = spec.lattice.half_width;
    if (std::abs(j) == J) return {{j, 1.0}};
    std::vector<std::pair<int, double>> out;
    if (w.p > 0.0) out.emplace_back(j - 1, w.p);
    if (w.pm > 0.0) out.emplace_back(j, w.pm);
    if (w.p > 0.0) out.emplace_back(j + 1, w.p);
    return out;
}

}  // namespace

LatticeSurface solve_obstacle_fd(const ProblemSpec& spec) {
    require_cfl(spec);
    const int n = spec.grid.n_steps;
    const int width = spec.lattice.size();
    const auto [glo, ghi] = ghosts(spec);
    LatticeSurface u(SurfaceKind::Y, n, width);
    for (int k = 0; k < width; ++k) u.at(n, k) = spec.terminal(spec.lattice.x(k));
    for (int i = n - 1; i >= 0; --i) {
        explicit_step(spec, i, u.row(i + 1), u.row(i), glo, ghi);
        if (spec.has_obstacle()) {
            const double t = spec.grid.t(i);
            for (int k = 0; k < width; ++k) u.at(i, k) = std::min(spec.obstacle(t, spec.lattice.x(k)), u.at(i, k));
        }
    }
    return u;
}

LatticeSurface solve_penalized_fd(const ProblemSpec& spec, double n_pen) {
    require_cfl(spec);
    if (!(n_pen >= 0.0)) throw InvalidInput("penalty level must be nonnegative");
    if (n_pen > 0.0 && !spec.has_obstacle()) throw InvalidInput("penalty needs an obstacle");
    const double dt = spec.grid.dt();
    if (!(dt * (spec.lipschitz + n_pen) < 0.5)) {
        throw InvalidInput("solve_penalized_fd: dt*(L+n) >= 1/2, refine the time grid");
    }
    const int n = spec.grid.n_steps;
    const int width = spec.lattice.size();
    const auto [glo, ghi] = ghosts(spec);
    LatticeSurface u(SurfaceKind::Y, n, width);
    for (int k = 0; k < width; ++k) u.at(n, k) = spec.terminal(spec.lattice.x(k));
    const double ndt = n_pen * dt;
    for (int i = n - 1; i >= 0; --i) {
        explicit_step(spec, i, u.row(i + 1), u.row(i), glo, ghi);
        if (n_pen > 0.0) {
            const double t = spec.grid.t(i);
            for (int k = 0; k < width; ++k) {
                const double s = spec.obstacle(t, spec.lattice.x(k));
                const double v = u.at(i, k);
                if (v > s) u.at(i, k) = s + (v - s) / (1.0 + ndt);
            }
        }
    }
    return u;
}

StoppingResult optimal_stopping_oracle(const ProblemSpec& spec) {
    const ClassicalTree w = classical_weights(spec);
    const int n = spec.grid.n_steps;
    const int width = spec.lattice.size();
    const double dt = spec.grid.dt();
    StoppingResult out{LatticeSurface(SurfaceKind::Y, n, width), LatticeSurface(SurfaceKind::Defect, n, width)};
    for (int k = 0; k < width; ++k) out.value.at(n, k) = spec.terminal(spec.lattice.x(k));
    for (int i = n - 1; i >= 0; --i) {
        const double t = spec.grid.t(i);
        for (int k = 0; k < width; ++k) {
            const int j = k - spec.lattice.half_width;
            const double x = spec.lattice.x(k);
            double cont = dt * spec.f(t, x, 0.0, 0.0);
            for (const auto& [target, prob] : moves(spec, w, j)) {
                cont += prob * out.value.at(i + 1, target + spec.lattice.half_width);
            }
            const double s = spec.obstacle(t, x);
            out.value.at(i, k) = std::min(s, cont);
            out.stop_region.at(i, k) = s <= cont ? 1.0 : 0.0;
        }
    }
    return out;
}

double brute_force_stopping_sets(const ProblemSpec& spec) {
    const ClassicalTree w = classical_weights(spec);
    const int n = spec.grid.n_steps;
    const double dt = spec.grid.dt();

    // reachable nodes by step, as offsets j
    std::vector<std::vector<int>> reach(static_cast<std::size_t>(n + 1));
    reach[0] = {0};
    for (int i = 0; i < n; ++i) {
        std::vector<int> next;
        for (int j : reach[static_cast<std::size_t>(i)]) {
            for (const auto& mv : moves(spec, w, j)) next.push_back(mv.first);
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        reach[static_cast<std::size_t>(i + 1)] = std::move(next);
    }

    struct Node {
        double stop = 0.0;
        double run = 0.0;
        std::vector<std::pair<int, double>> children;  // (node index, prob)
    };
    std::vector<Node> nodes;
    std::map<std::pair<int, int>, int> index;
    // terminal nodes first, then decision nodes backward in time
    for (int j : reach[static_cast<std::size_t>(n)]) {
        index[{n, j}] = static_cast<int>(nodes.size());
        nodes.push_back({spec.terminal(j * spec.lattice.spacing), 0.0, {}});
    }
    const int first_decision = static_cast<int>(nodes.size());
    for (int i = n - 1; i >= 0; --i) {
        const double t = spec.grid.t(i);
        for (int j : reach[static_cast<std::size_t>(i)]) {
            const double x = j * spec.lattice.spacing;
            Node node{spec.obstacle(t, x), dt * spec.f(t, x, 0.0, 0.0), {}};
            for (const auto& [target, prob] : moves(spec, w, j)) node.children.emplace_back(index.at({i + 1, target}), prob);
            index[{i, j}] = static_cast<int>(nodes.size());
            nodes.push_back(std::move(node));
        }
    }
    const int decisions = static_cast<int>(nodes.size()) - first_decision;
    if (decisions > 22) {
        std::ostringstream msg;
        msg << "brute_force_stopping_sets: " << decisions << " decision nodes exceed the enumeration limit of 22";
        throw InvalidInput(msg.str());
    }

    std::vector<double> value(nodes.size());
    for (int a = 0; a < first_decision; ++a) value[static_cast<std::size_t>(a)] = nodes[static_cast<std::size_t>(a)].stop;
    double best = std::numeric_limits<double>::infinity();
    const std::uint64_t count = std::uint64_t{1} << decisions;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        for (int d = 0; d < decisions; ++d) {
            const auto a = static_cast<std::size_t>(first_decision + d);
            if (mask & (std::uint64_t{1} << d)) {
                value[a] = nodes[a].stop;
            } else {
                double cont = nodes[a].run;
                for (const auto& [child, prob] : nodes[a].children) cont += prob * value[static_cast<std::size_t>(child)];
                value[a] = cont;
            }
        }
        best = std::min(best, value.back());
    }
    return best;
}

double brute_force_path_tree(const ProblemSpec& spec) {
    const ClassicalTree w = classical_weights(spec);
    const int n = spec.grid.n_steps;
    if (n > 12) throw InvalidInput("brute_force_path_tree: at most 12 steps");
    const double dt = spec.grid.dt();
    const double h = spec.lattice.spacing;

    struct Walker {
        const ProblemSpec& spec;
        const ClassicalTree& w;
        int n;
        double dt;
        double h;
        double operator()(int i, int j) const {
            const double x = j * h;
            if (i == n) return spec.terminal(x);
            const double t = spec.grid.t(i);
            double cont = dt * spec.f(t, x, 0.0, 0.0);
            for (const auto& [target, prob] : moves(spec, w, j)) cont += prob * (*this)(i + 1, target);
            return std::min(spec.obstacle(t, x), cont);
        }
    };
    return Walker{spec, w, n, dt, h}(0, 0);
}

}  // namespace gbsde
