#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gbsde {

struct RunOptions {
    std::string command;
    std::string config_path;
    std::string out_dir;
    int threads = 1;
    std::optional<std::uint64_t> seed;
};

/// Subcommands accepted by run().
const std::vector<std::string>& run_commands();

/**
 * Executes one subcommand and writes its CSV surfaces and JSON report into out_dir.
 * Returns 0 if every requested check passes, 1 if some check fails (reports still
 * written), 2 on configuration or input errors (message names the key).
 */
int run(const RunOptions& options, std::ostream& log);

}  // namespace gbsde
