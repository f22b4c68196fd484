#include "gbsde/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gbsde {

namespace {

using json = nlohmann::ordered_json;

std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

const json& require_object(const json& node, const std::string& key) {
    if (!node.is_object()) throw ConfigError(key, "expected an object");
    return node;
}

double number(const json& node, const std::string& field, const std::string& base, std::optional<double> fallback) {
    const std::string key = join(base, field);
    if (!node.contains(field)) {
        if (fallback) return *fallback;
        throw ConfigError(key, "missing required number");
    }
    const json& v = node.at(field);
    if (!v.is_number()) throw ConfigError(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key, "must be finite");
    return d;
}

std::int64_t integer(const json& node, const std::string& field, const std::string& base,
                     std::optional<std::int64_t> fallback) {
    const std::string key = join(base, field);
    if (!node.contains(field)) {
        if (fallback) return *fallback;
        throw ConfigError(key, "missing required integer");
    }
    const json& v = node.at(field);
    if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
    return v.get<std::int64_t>();
}

std::string name_of(const json& node, const std::string& key) {
    if (node.is_string()) return node.get<std::string>();
    require_object(node, key);
    if (!node.contains("name") || !node.at("name").is_string()) throw ConfigError(join(key, "name"), "missing built-in name");
    return node.at("name").get<std::string>();
}

const json& params(const json& node) {
    static const json empty = json::object();
    return node.is_object() ? node : empty;
}

void check_keys(const json& node, const std::string& key, std::initializer_list<const char*> allowed) {
    if (!node.is_object()) return;
    for (const auto& item : node.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; }) ==
            allowed.end()) {
            throw ConfigError(join(key, item.key()), "unknown key");
        }
    }
}

std::vector<double> n_schedule(const json& node, const std::string& key) {
    std::vector<double> out;
    if (node.contains("n_list")) {
        const json& list = node.at("n_list");
        if (!list.is_array()) throw ConfigError(join(key, "n_list"), "expected an array of numbers");
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (!list[i].is_number()) throw ConfigError(join(key, "n_list") + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(list[i].get<double>());
        }
    } else {
        const double start = number(node, "n_start", key, 4.0);
        const double factor = number(node, "n_factor", key, 2.0);
        const double max = number(node, "n_max", key, 1024.0);
        if (!(start > 0.0)) throw ConfigError(join(key, "n_start"), "must be positive");
        if (!(factor > 1.0)) throw ConfigError(join(key, "n_factor"), "must exceed 1");
        for (double n = start; n <= max * (1.0 + 1e-12); n *= factor) out.push_back(n);
    }
    if (out.empty()) throw ConfigError(key, "empty penalty schedule");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(out[i] > 0.0) || (i > 0 && !(out[i] > out[i - 1]))) {
            throw ConfigError(join(key, "n_list"), "must be positive and strictly increasing");
        }
    }
    return out;
}

CoefficientFn constant_fn(double c) {
    if (c == 0.0) return {};
    return [c](double) { return c; };
}

}  // namespace

NamedTerminal parse_terminal(const json& node, const std::string& key) {
    const std::string name = name_of(node, key);
    const json& p = params(node);
    std::ostringstream label;
    if (name == "quadratic") {
        check_keys(node, key, {"name", "scale"});
        const double a = number(p, "scale", key, 1.0);
        label << "quadratic(scale=" << a << ")";
        return {label.str(), [a](double x) { return a * x * x; }, a >= 0.0};
    }
    if (name == "put") {
        check_keys(node, key, {"name", "strike"});
        const double k = number(p, "strike", key, 0.0);
        label << "put(strike=" << k << ")";
        return {label.str(), [k](double x) { return std::min(x - k, 0.0); }, false};
    }
    if (name == "call") {
        check_keys(node, key, {"name", "strike"});
        const double k = number(p, "strike", key, 0.0);
        label << "call(strike=" << k << ")";
        return {label.str(), [k](double x) { return std::max(x - k, 0.0); }, true};
    }
    if (name == "constant") {
        check_keys(node, key, {"name", "value"});
        const double c = number(p, "value", key, 0.0);
        label << "constant(value=" << c << ")";
        return {label.str(), [c](double) { return c; }, true};
    }
    if (name == "linear") {
        check_keys(node, key, {"name", "slope", "intercept"});
        const double s = number(p, "slope", key, 1.0);
        const double c = number(p, "intercept", key, 0.0);
        label << "linear(slope=" << s << ",intercept=" << c << ")";
        return {label.str(), [s, c](double x) { return s * x + c; }, true};
    }
    throw ConfigError(join(key, "name"), "unknown terminal '" + name + "' (quadratic, put, call, constant, linear)");
}

std::pair<DriverFn, double> parse_generator(const json& node, const std::string& key) {
    const std::string name = name_of(node, key);
    const json& p = params(node);
    if (name == "zero") {
        check_keys(node, key, {"name"});
        return {DriverFn{}, 0.0};
    }
    if (name == "constant") {
        check_keys(node, key, {"name", "value"});
        const double c = number(p, "value", key, 0.0);
        return {[c](double, double, double, double) { return c; }, 0.0};
    }
    if (name == "affine") {
        check_keys(node, key, {"name", "y", "z", "abs_z", "const"});
        const double a = number(p, "y", key, 0.0);
        const double b = number(p, "z", key, 0.0);
        const double k = number(p, "abs_z", key, 0.0);
        const double c = number(p, "const", key, 0.0);
        return {[a, b, k, c](double, double, double y, double z) { return a * y + b * z + k * std::abs(z) + c; },
                std::max(std::abs(a), std::abs(b) + std::abs(k))};
    }
    throw ConfigError(join(key, "name"), "unknown generator '" + name + "' (zero, constant, affine)");
}

std::pair<ObstacleFn, std::optional<ObstacleDynamics>> parse_obstacle(const json& node, const std::string& key) {
    const std::string name = name_of(node, key);
    const json& p = params(node);
    if (name == "none") {
        check_keys(node, key, {"name"});
        return {ObstacleFn{}, std::nullopt};
    }
    if (name == "constant") {
        check_keys(node, key, {"name", "value"});
        const double c = number(p, "value", key, 0.0);
        ObstacleDynamics dyn{[](double, double) { return 0.0; }, [](double, double) { return 0.0; }};
        return {[c](double, double) { return c; }, dyn};
    }
    if (name == "ito") {
        check_keys(node, key, {"name", "s0", "drift", "loading"});
        const double s0 = number(p, "s0", key, 0.0);
        const double b = number(p, "drift", key, 0.0);
        const double l = number(p, "loading", key, 0.0);
        ObstacleDynamics dyn{[b](double, double) { return b; }, [l](double, double) { return l; }};
        return {[s0, b, l](double t, double x) { return s0 + b * t + l * x; }, dyn};
    }
    throw ConfigError(join(key, "name"), "unknown obstacle '" + name + "' (none, constant, ito)");
}

ExperimentConfig parse_config(const json& root) {
    require_object(root, "<root>");
    check_keys(root, "", {"problem", "band", "grid", "penalty", "mc", "compare", "checks", "output"});
    ExperimentConfig cfg;

    if (!root.contains("band")) throw ConfigError("band", "missing section");
    const json& band = require_object(root.at("band"), "band");
    check_keys(band, "band", {"sigma_lo_sq", "sigma_hi_sq"});
    cfg.spec.band.sigma_lo_sq = number(band, "sigma_lo_sq", "band", std::nullopt);
    cfg.spec.band.sigma_hi_sq = number(band, "sigma_hi_sq", "band", std::nullopt);
    if (!(cfg.spec.band.sigma_lo_sq > 0.0)) throw ConfigError("band.sigma_lo_sq", "must be positive (non-degenerate G)");
    if (cfg.spec.band.sigma_hi_sq < cfg.spec.band.sigma_lo_sq) {
        throw ConfigError("band.sigma_hi_sq", "must be >= sigma_lo_sq");
    }

    if (!root.contains("grid")) throw ConfigError("grid", "missing section");
    const json& grid = require_object(root.at("grid"), "grid");
    check_keys(grid, "grid", {"T", "n_steps", "coverage_sigmas", "boundary"});
    const double T = number(grid, "T", "grid", 1.0);
    const std::int64_t steps = integer(grid, "n_steps", "grid", std::nullopt);
    const double coverage = number(grid, "coverage_sigmas", "grid", 6.0);
    if (!(T > 0.0)) throw ConfigError("grid.T", "must be positive");
    if (steps < 1 || steps > 1000000) throw ConfigError("grid.n_steps", "must be in [1, 1e6]");
    if (!(coverage > 0.0)) throw ConfigError("grid.coverage_sigmas", "must be positive");
    BoundaryMode boundary = BoundaryMode::ClampSecondDifference;
    if (grid.contains("boundary")) {
        const json& b = grid.at("boundary");
        if (b == "clamp") {
            boundary = BoundaryMode::ClampSecondDifference;
        } else if (b == "dirichlet") {
            boundary = BoundaryMode::DirichletTerminalExtension;
        } else {
            throw ConfigError("grid.boundary", "expected \"clamp\" or \"dirichlet\"");
        }
    }
    const Grid g = build_grid(cfg.spec.band, T, static_cast<int>(steps), coverage, boundary);
    cfg.spec.grid = g.time;
    cfg.spec.lattice = g.lattice;

    const json problem = root.contains("problem") ? require_object(root.at("problem"), "problem") : json::object();
    check_keys(problem, "problem", {"terminal", "generator", "obstacle"});
    cfg.terminal = parse_terminal(problem.value("terminal", json("quadratic")), "problem.terminal");
    cfg.spec.terminal = cfg.terminal.fn;
    std::tie(cfg.spec.driver, cfg.spec.lipschitz) =
        parse_generator(problem.value("generator", json("zero")), "problem.generator");
    std::tie(cfg.spec.obstacle, cfg.spec.obstacle_dynamics) =
        parse_obstacle(problem.value("obstacle", json("none")), "problem.obstacle");

    const json penalty = root.contains("penalty") ? require_object(root.at("penalty"), "penalty") : json::object();
    check_keys(penalty, "penalty", {"n_list", "n_start", "n_factor", "n_max", "tol"});
    cfg.n_list = n_schedule(penalty, "penalty");
    cfg.reflected.n_schedule = cfg.n_list;
    cfg.reflected.tol = number(penalty, "tol", "penalty", 1e-3);
    if (!(cfg.reflected.tol > 0.0)) throw ConfigError("penalty.tol", "must be positive");

    const json mc = root.contains("mc") ? require_object(root.at("mc"), "mc") : json::object();
    check_keys(mc, "mc", {"n_paths", "seed", "policies", "payoffs"});
    cfg.mc.n_paths = integer(mc, "n_paths", "mc", 100000);
    if (cfg.mc.n_paths < 1000) throw ConfigError("mc.n_paths", "must be >= 1000");
    const std::int64_t seed = integer(mc, "seed", "mc", 20240601);
    if (seed < 0) throw ConfigError("mc.seed", "must be nonnegative");
    cfg.mc.seed = static_cast<std::uint64_t>(seed);
    if (mc.contains("policies")) {
        const json& pol = mc.at("policies");
        if (!pol.is_array()) throw ConfigError("mc.policies", "expected an array");
        for (std::size_t i = 0; i < pol.size(); ++i) {
            const std::string key = "mc.policies[" + std::to_string(i) + "]";
            const json& p = require_object(pol[i], key);
            const std::string kind = p.value("kind", "");
            if (kind == "constant") {
                check_keys(p, key, {"kind", "v"});
                number(p, "v", key, std::nullopt);
            } else if (kind == "feedback") {
                check_keys(p, key, {"kind"});
            } else if (kind == "table") {
                check_keys(p, key, {"kind", "rates"});
                if (!p.contains("rates") || !p.at("rates").is_array() ||
                    static_cast<std::int64_t>(p.at("rates").size()) != steps) {
                    throw ConfigError(key + ".rates", "expected one rate per time step");
                }
            } else {
                throw ConfigError(key + ".kind", "expected constant, feedback or table");
            }
        }
        cfg.mc.policies = pol;
    }
    if (mc.contains("payoffs")) {
        const json& pay = mc.at("payoffs");
        if (!pay.is_array() || pay.empty()) throw ConfigError("mc.payoffs", "expected a nonempty array");
        for (std::size_t i = 0; i < pay.size(); ++i) {
            cfg.mc.payoffs.push_back(parse_terminal(pay[i], "mc.payoffs[" + std::to_string(i) + "]"));
        }
    } else {
        cfg.mc.payoffs.push_back(cfg.terminal);
    }

    const json cmp = root.contains("compare") ? require_object(root.at("compare"), "compare") : json::object();
    check_keys(cmp, "compare", {"lower", "rate_a", "duality"});
    const json lower = cmp.contains("lower") ? require_object(cmp.at("lower"), "compare.lower") : json::object();
    check_keys(lower, "compare.lower", {"terminal", "generator"});
    cfg.compare.lower_terminal =
        lower.contains("terminal") ? parse_terminal(lower.at("terminal"), "compare.lower.terminal") : cfg.terminal;
    cfg.compare.lower_driver = lower.contains("generator")
                                   ? parse_generator(lower.at("generator"), "compare.lower.generator").first
                                   : cfg.spec.driver;
    cfg.compare.rate_a = number(cmp, "rate_a", "compare", 0.0);
    if (cfg.compare.rate_a < 0.0) throw ConfigError("compare.rate_a", "must be nonnegative");
    if (cmp.contains("duality")) {
        const json& d = require_object(cmp.at("duality"), "compare.duality");
        check_keys(d, "compare.duality", {"v", "a", "b", "c", "d", "m", "n", "K_rate"});
        DualityConfig dc;
        dc.v = number(d, "v", "compare.duality", 1.0);
        if (!(dc.v > 0.0)) throw ConfigError("compare.duality.v", "must be positive");
        dc.coeffs.a = constant_fn(number(d, "a", "compare.duality", 0.0));
        dc.coeffs.b = constant_fn(number(d, "b", "compare.duality", 0.0));
        dc.coeffs.c = constant_fn(number(d, "c", "compare.duality", 0.0));
        dc.coeffs.d = constant_fn(number(d, "d", "compare.duality", 0.0));
        dc.coeffs.m = constant_fn(number(d, "m", "compare.duality", 0.0));
        dc.coeffs.n = constant_fn(number(d, "n", "compare.duality", 0.0));
        dc.K_rate = number(d, "K_rate", "compare.duality", 1.0);
        if (dc.K_rate < 0.0) throw ConfigError("compare.duality.K_rate", "must be nonnegative (submartingale)");
        cfg.compare.duality = dc;
    }

    if (root.contains("checks")) {
        const json& c = root.at("checks");
        if (!c.is_array()) throw ConfigError("checks", "expected an array of check names");
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!c[i].is_string()) throw ConfigError("checks[" + std::to_string(i) + "]", "expected a string");
            cfg.checks.push_back(c[i].get<std::string>());
        }
    }

    const json output = root.contains("output") ? require_object(root.at("output"), "output") : json::object();
    check_keys(output, "output", {"time_stride"});
    const std::int64_t stride = integer(output, "time_stride", "output", 0);
    if (stride < 0) throw ConfigError("output.time_stride", "must be nonnegative (0 = automatic)");
    cfg.time_stride = static_cast<int>(stride);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    json root;
    try {
        root = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("--config", std::string("parse error: ") + e.what());
    }
    return parse_config(root);
}

}  // namespace gbsde
