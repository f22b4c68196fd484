#include "gbsde/montecarlo.hpp"

#include "gbsde/sublinear.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

namespace gbsde {

namespace {

constexpr double kBandSlack = 1e-12;

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
};

McEstimate finish(const std::vector<Moments>& blocks, std::int64_t n_paths) {
    // Blocks are combined in index order so the result never depends on scheduling.
    long double sum = 0.0L;
    long double sum_sq = 0.0L;
    for (const auto& b : blocks) {
        sum += b.sum;
        sum_sq += b.sum_sq;
    }
    const long double count = static_cast<long double>(n_paths);
    const long double mean = sum / count;
    const long double var = std::max(0.0L, (sum_sq - count * mean * mean) / (count - 1.0L));
    return {static_cast<double>(mean), static_cast<double>(std::sqrt(var / count))};
}

// Simulates every policy on the same normals; returns per-policy moments for each block.
std::vector<std::vector<Moments>> simulate(const TerminalFn& xi, const VolatilityBand& band, const TimeGrid& grid,
                                           const std::vector<VolatilityPolicy>& family, std::int64_t n_paths,
                                           std::uint64_t seed) {
    if (n_paths < 1000) throw InvalidInput("Monte Carlo needs n_paths >= 1000");
    if (family.empty()) throw InvalidInput("Monte Carlo needs at least one policy");
    if (!(band.sigma_lo_sq > 0.0) || band.sigma_lo_sq > band.sigma_hi_sq) {
        throw InvalidInput("Monte Carlo: require 0 < sigma_lo_sq <= sigma_hi_sq");
    }
    for (const auto& p : family) {
        if (p.kind == PolicyKind::TimeTable && static_cast<int>(p.table.size()) != grid.n_steps) {
            throw InvalidInput("time-table policy needs one rate per time step");
        }
    }
    const std::int64_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
    const std::size_t n_policies = family.size();
    std::vector<std::vector<Moments>> out(n_policies, std::vector<Moments>(static_cast<std::size_t>(n_blocks)));
    const double dt = grid.dt();
    const int steps = grid.n_steps;
    bool band_violation = false;
    double offending = 0.0;

#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t block = 0; block < n_blocks; ++block) {
        const std::int64_t first = block * kPathBlock;
        const std::int64_t count = std::min(kPathBlock, n_paths - first);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> state(n_policies * static_cast<std::size_t>(count), 0.0);
        for (int i = 0; i < steps; ++i) {
            const double t = grid.t(i);
            for (std::int64_t p = 0; p < count; ++p) {
                const double eta = normal(rng);
                for (std::size_t q = 0; q < n_policies; ++q) {
                    double& b = state[q * static_cast<std::size_t>(count) + static_cast<std::size_t>(p)];
                    const double v = family[q].at(band, i, t, b);
                    if (!(v >= band.sigma_lo_sq - kBandSlack && v <= band.sigma_hi_sq + kBandSlack)) {
#pragma omp critical
                        {
                            band_violation = true;
                            offending = v;
                        }
                        continue;
                    }
                    b += std::sqrt(v * dt) * eta;
                }
            }
        }
        for (std::size_t q = 0; q < n_policies; ++q) {
            Moments m;
            for (std::int64_t p = 0; p < count; ++p) {
                const double y = xi(state[q * static_cast<std::size_t>(count) + static_cast<std::size_t>(p)]);
                m.sum += y;
                m.sum_sq += y * y;
            }
            out[q][static_cast<std::size_t>(block)] = m;
        }
    }
    if (band_violation) {
        std::ostringstream msg;
        msg << "policy emitted variance rate " << offending << " outside [" << band.sigma_lo_sq << ", "
            << band.sigma_hi_sq << "]";
        throw InvalidInput(msg.str());
    }
    return out;
}

}  // namespace

VolatilityPolicy VolatilityPolicy::constant(double v) {
    VolatilityPolicy p;
    p.kind = PolicyKind::Constant;
    p.rate = v;
    std::ostringstream label;
    label << "constant " << v;
    p.label = label.str();
    return p;
}

VolatilityPolicy VolatilityPolicy::feedback(std::function<double(double, double)> indicator, std::string label) {
    VolatilityPolicy p;
    p.kind = PolicyKind::ThresholdFeedback;
    p.indicator = std::move(indicator);
    p.label = std::move(label);
    return p;
}

VolatilityPolicy VolatilityPolicy::time_table(std::vector<double> rates, std::string label) {
    VolatilityPolicy p;
    p.kind = PolicyKind::TimeTable;
    p.table = std::move(rates);
    p.label = std::move(label);
    return p;
}

double VolatilityPolicy::at(const VolatilityBand& band, int step, double t, double x) const {
    switch (kind) {
        case PolicyKind::Constant: return rate;
        case PolicyKind::ThresholdFeedback: return indicator(t, x) > 0.0 ? band.sigma_hi_sq : band.sigma_lo_sq;
        case PolicyKind::TimeTable: return table[static_cast<std::size_t>(step)];
    }
    return rate;
}

McEstimate simulate_policy_value(const TerminalFn& xi, const VolatilityBand& band, const TimeGrid& grid,
                                 const VolatilityPolicy& policy, std::int64_t n_paths, std::uint64_t seed) {
    return finish(simulate(xi, band, grid, {policy}, n_paths, seed).front(), n_paths);
}

PolicySearch sup_over_policies(const TerminalFn& xi, const VolatilityBand& band, const TimeGrid& grid,
                               const std::vector<VolatilityPolicy>& family, std::int64_t n_paths, std::uint64_t seed) {
    const auto blocks = simulate(xi, band, grid, family, n_paths, seed);
    PolicySearch out;
    for (const auto& b : blocks) out.values.push_back(finish(b, n_paths));
    for (std::size_t q = 1; q < out.values.size(); ++q) {
        if (out.values[q].estimate > out.values[out.best].estimate) out.best = q;
    }
    return out;
}

std::function<double(double, double)> lattice_convexity_indicator(const ProblemSpec& spec) {
    const GExpectation op(spec);
    auto surface = std::make_shared<LatticeSurface>(op.conditional(terminal_row(spec)));
    const TimeGrid grid = spec.grid;
    const SpatialLattice lattice = spec.lattice;
    return [surface, grid, lattice](double t, double x) {
        const int i = std::clamp(static_cast<int>(std::lround(t / grid.dt())), 0, grid.n_steps - 1);
        const int k = std::clamp(static_cast<int>(std::lround(x / lattice.spacing)) + lattice.half_width, 1,
                                 lattice.size() - 2);
        // The decision at step i looks at the row it is about to average over.
        return surface->at(i + 1, k + 1) - 2.0 * surface->at(i + 1, k) + surface->at(i + 1, k - 1);
    };
}

CheckResult representation_check(const std::string& name, double lattice_value, const PolicySearch& search,
                                 bool require_attainment) {
    const McEstimate& best = search.sup();
    const double allowance = 3.0 * best.std_error + 0.02 * (1.0 + std::abs(lattice_value));
    const double excess = best.estimate - lattice_value;
    CheckResult out;
    out.name = name;
    out.tolerance = allowance;
    out.anchor = "representation: E-hat[xi] = sup over a weakly compact set of priors of E_P[xi]";
    double margin = allowance - excess;
    if (require_attainment) margin = std::min(margin, allowance + excess);
    out.margin = margin;
    out.pass = margin >= 0.0;
    std::ostringstream detail;
    detail << "lattice=" << lattice_value << " mc_sup=" << best.estimate << " se=" << best.std_error;
    out.detail = detail.str();
    return out;
}

}  // namespace gbsde
