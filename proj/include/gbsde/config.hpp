#pragma once

#include "gbsde/comparison.hpp"
#include "gbsde/model.hpp"
#include "gbsde/montecarlo.hpp"
#include "gbsde/penalization.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbsde {

/// Malformed or inconsistent experiment configuration; key() is the offending JSON path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
    [[nodiscard]] const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// A built-in terminal payoff with what the runner needs to know about its shape.
struct NamedTerminal {
    std::string name;
    TerminalFn fn;
    bool convex = false;
};

struct McConfig {
    std::int64_t n_paths = 100000;
    std::uint64_t seed = 20240601;
    /// Empty means {constant sigma_lo_sq, constant sigma_hi_sq, lattice feedback}.
    nlohmann::ordered_json policies = nlohmann::ordered_json::array();
    std::vector<NamedTerminal> payoffs;
};

struct DualityConfig {
    double v = 1.0;
    LinearCoefficients coeffs;
    /// K_t = K_rate * t.
    double K_rate = 1.0;
};

struct CompareConfig {
    NamedTerminal lower_terminal;
    DriverFn lower_driver;
    double rate_a = 0.0;
    std::optional<DualityConfig> duality;
};

struct ExperimentConfig {
    ProblemSpec spec;
    NamedTerminal terminal;
    std::vector<double> n_list;
    ReflectedOptions reflected;
    McConfig mc;
    CompareConfig compare;
    /// Names of checks that count toward the exit status; empty means all.
    std::vector<std::string> checks;
    /// Surfaces are written every time_stride steps (the last step is always written);
    /// 0 picks the smallest stride giving at most 200 intervals.
    int time_stride = 0;
};

NamedTerminal parse_terminal(const nlohmann::ordered_json& node, const std::string& key);
/// Driver plus its Lipschitz constant in (y, z).
std::pair<DriverFn, double> parse_generator(const nlohmann::ordered_json& node, const std::string& key);
/// Obstacle function (empty for "none") and its declared Ito dynamics.
std::pair<ObstacleFn, std::optional<ObstacleDynamics>> parse_obstacle(const nlohmann::ordered_json& node,
                                                                      const std::string& key);

ExperimentConfig parse_config(const nlohmann::ordered_json& root);
ExperimentConfig load_config(const std::string& path);

}  // namespace gbsde
