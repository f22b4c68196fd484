#pragma once

#include <string>
#include <vector>

namespace gbsde {

/// One property check: pass/fail with the numeric margin against its tolerance.
struct CheckResult {
    std::string name;
    bool pass = false;
    double margin = 0.0;
    double tolerance = 0.0;
    std::string anchor;
    std::string detail;
};

struct DiagnosticsReport {
    std::vector<CheckResult> checks;

    void add(CheckResult c) { checks.push_back(std::move(c)); }
    [[nodiscard]] bool all_pass() const noexcept {
        for (const auto& c : checks) {
            if (!c.pass) return false;
        }
        return true;
    }
};

}  // namespace gbsde
