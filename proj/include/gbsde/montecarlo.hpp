#pragma once

#include "gbsde/diagnostics.hpp"
#include "gbsde/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gbsde {

enum class PolicyKind { Constant, ThresholdFeedback, TimeTable };

/**
 * Volatility control for Euler paths. Every emitted rate must lie in the band;
 * simulation throws InvalidInput otherwise.
 */
struct VolatilityPolicy {
    PolicyKind kind = PolicyKind::Constant;
    std::string label;
    /// Constant: the rate.
    double rate = 1.0;
    /// ThresholdFeedback: sigma_hi_sq where indicator(t, x) > 0, else sigma_lo_sq.
    std::function<double(double t, double x)> indicator;
    /// TimeTable: rate per time step (size n_steps).
    std::vector<double> table;

    static VolatilityPolicy constant(double v);
    static VolatilityPolicy feedback(std::function<double(double, double)> indicator, std::string label = "feedback");
    static VolatilityPolicy time_table(std::vector<double> rates, std::string label = "table");

    [[nodiscard]] double at(const VolatilityBand& band, int step, double t, double x) const;
};

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

struct PolicySearch {
    std::vector<McEstimate> values;
    std::size_t best = 0;
    [[nodiscard]] const McEstimate& sup() const { return values.at(best); }
};

/// Paths are simulated in blocks of this many, each with its own seed derived from (seed, block).
inline constexpr std::int64_t kPathBlock = 4096;

/**
 * E_P[xi(B_T)] under the Euler scheme B_{i+1} = B_i + sqrt(v_i dt) eta_i, B_0 = 0.
 * Deterministic in seed and independent of the thread count. Requires n_paths >= 1000.
 */
McEstimate simulate_policy_value(const TerminalFn& xi, const VolatilityBand& band, const TimeGrid& grid,
                                 const VolatilityPolicy& policy, std::int64_t n_paths, std::uint64_t seed);

/// Every policy on common random numbers; best is the index of the largest estimate.
PolicySearch sup_over_policies(const TerminalFn& xi, const VolatilityBand& band, const TimeGrid& grid,
                               const std::vector<VolatilityPolicy>& family, std::int64_t n_paths, std::uint64_t seed);

/**
 * Feedback indicator from the lattice: sign of the discrete second difference of
 * the conditional G-expectation of xi at the nearest node (the maximizing scenario
 * is sigma_hi_sq exactly where it is positive).
 */
std::function<double(double, double)> lattice_convexity_indicator(const ProblemSpec& spec);

/**
 * Domination: sup <= lattice + 3 SE + 0.02 (1 + |lattice|).
 * Attainment (when require_attainment): lattice - sup <= 3 SE + 0.02 (1 + |lattice|).
 */
CheckResult representation_check(const std::string& name, double lattice_value, const PolicySearch& search,
                                  bool require_attainment);

}  // namespace gbsde
