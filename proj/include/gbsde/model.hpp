#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbsde {

/// Error raised when an operation's precondition is violated by its inputs.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/**
 * Volatility uncertainty interval [sigma_lo_sq, sigma_hi_sq] (variance per unit time).
 *
 * The associated G function in one dimension is
 *   G(a) = 1/2 (sigma_hi_sq * a^+ - sigma_lo_sq * a^-).
 */
struct VolatilityBand {
    double sigma_lo_sq = 1.0;
    double sigma_hi_sq = 1.0;

    [[nodiscard]] double G(double a) const noexcept {
        return a >= 0.0 ? 0.5 * sigma_hi_sq * a : 0.5 * sigma_lo_sq * a;
    }
    [[nodiscard]] bool degenerate() const noexcept { return sigma_lo_sq == sigma_hi_sq; }
};

/// Uniform partition of [0, T]. Times are computed as T*i/n so t_n == T exactly.
struct TimeGrid {
    double horizon = 1.0;
    int n_steps = 1;

    [[nodiscard]] double dt() const noexcept { return horizon / n_steps; }
    [[nodiscard]] double t(int i) const noexcept {
        return i == n_steps ? horizon : horizon * static_cast<double>(i) / n_steps;
    }
};

enum class BoundaryMode {
    /// Discrete second difference forced to zero at |j| = J (node value carried over).
    ClampSecondDifference,
    /// Ghost nodes at |j| = J+1 hold the terminal function value for all times.
    DirichletTerminalExtension,
};

/// Symmetric spatial lattice x_j = j*h, j in {-J..J}. Storage index k = j + J.
struct SpatialLattice {
    double spacing = 0.1;
    int half_width = 1;
    BoundaryMode boundary = BoundaryMode::ClampSecondDifference;

    [[nodiscard]] int size() const noexcept { return 2 * half_width + 1; }
    [[nodiscard]] double x(int k) const noexcept {
        return static_cast<double>(k - half_width) * spacing;
    }
    [[nodiscard]] int center() const noexcept { return half_width; }
};

using TerminalFn = std::function<double(double x)>;
using DriverFn = std::function<double(double t, double x, double y, double z)>;
using ObstacleFn = std::function<double(double t, double x)>;

/// Declared Ito coefficients of a Markovian obstacle S_t = S_0 + int b ds + int sigma dB.
struct ObstacleDynamics {
    ObstacleFn drift;
    ObstacleFn diffusion;
};

/**
 * Markovian data of a (reflected) G-BSDE instance plus its lattice.
 *
 * An empty driver means f == 0; an empty obstacle means the unreflected problem.
 */
struct ProblemSpec {
    VolatilityBand band;
    TimeGrid grid;
    SpatialLattice lattice;
    TerminalFn terminal;
    DriverFn driver;
    ObstacleFn obstacle;
    std::optional<ObstacleDynamics> obstacle_dynamics;
    double lipschitz = 0.0;

    [[nodiscard]] bool has_obstacle() const noexcept { return static_cast<bool>(obstacle); }
    [[nodiscard]] double f(double t, double x, double y, double z) const {
        return driver ? driver(t, x, y, z) : 0.0;
    }
};

enum class SurfaceKind { Y, Z, Defect, AIncrement };

/**
 * Node-indexed values over the time x space lattice.
 *
 * Rows are absolute time steps; rows below first_step are not populated
 * (conditional expectations stopped at an intermediate step).
 */
class LatticeSurface {
public:
    LatticeSurface() = default;
    LatticeSurface(SurfaceKind kind, int n_steps, int width, int first_step = 0);

    [[nodiscard]] SurfaceKind kind() const noexcept { return kind_; }
    [[nodiscard]] int n_steps() const noexcept { return n_steps_; }
    [[nodiscard]] int width() const noexcept { return width_; }
    [[nodiscard]] int first_step() const noexcept { return first_step_; }

    [[nodiscard]] double& at(int i, int k) { return values_[index(i, k)]; }
    [[nodiscard]] double at(int i, int k) const { return values_[index(i, k)]; }

    [[nodiscard]] std::span<double> row(int i);
    [[nodiscard]] std::span<const double> row(int i) const;

    [[nodiscard]] bool all_finite() const noexcept;
    [[nodiscard]] double max_abs() const noexcept;
    [[nodiscard]] std::span<const double> data() const noexcept { return values_; }

private:
    [[nodiscard]] std::size_t index(int i, int k) const {
        return static_cast<std::size_t>(i - first_step_) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(k);
    }

    SurfaceKind kind_ = SurfaceKind::Y;
    int n_steps_ = 0;
    int width_ = 0;
    int first_step_ = 0;
    std::vector<double> values_;
};

/// max |a - b| over the rows both surfaces populate.
double max_abs_difference(const LatticeSurface& a, const LatticeSurface& b);
/// min (a - b) over the rows both surfaces populate.
double min_difference(const LatticeSurface& a, const LatticeSurface& b);

struct SpecViolation {
    std::string invariant;
    std::string detail;
    int step = -1;
    int node = -1;
    double value = 0.0;
};

struct ValidateOptions {
    bool check_obstacle = true;
    /// Extra Lipschitz budget consumed by the node equation (penalty level n).
    double extra_lipschitz = 0.0;
    double coverage_sigmas = 6.0;
};

/// Every violated standing assumption, in lattice-verifiable form. Empty means valid.
std::vector<SpecViolation> validate_spec(const ProblemSpec& spec, const ValidateOptions& options = {});

struct Grid {
    TimeGrid time;
    SpatialLattice lattice;
};

/// Tightest monotone spacing h = sqrt(sigma_hi_sq*dt) and J covering coverage_sigmas std devs.
Grid build_grid(const VolatilityBand& band, double horizon, int n_steps, double coverage_sigmas = 6.0,
                BoundaryMode boundary = BoundaryMode::ClampSecondDifference);

/// Same problem on a grid with dt halved; spacing re-tightened, spatial coverage kept.
ProblemSpec refine_time_grid(const ProblemSpec& spec);

/// Terminal function sampled on the lattice.
std::vector<double> terminal_row(const ProblemSpec& spec);
/// Obstacle sampled at step i (requires an obstacle).
std::vector<double> obstacle_row(const ProblemSpec& spec, int i);

}  // namespace gbsde
