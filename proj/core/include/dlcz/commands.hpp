#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dlcz/config.hpp"
#include "dlcz/sampler.hpp"

namespace dlcz::commands {

struct RunOptions {
    int jobs = 1;
    bool dry_run = false;        // print the plan and stop before simulating
    bool write_log = false;      // stream per-trial records next to the tables
    bool plot = false;           // add a plain-text rendering where available
    bool allow_off_larmor = false;
    std::optional<std::string> out_dir;          // overrides the configured directory
    std::optional<sampler::ScanChannel> channel; // crosstalk scans only
    std::ostream* out = nullptr;                 // progress stream, stdout when null
    std::ostream* err = nullptr;                 // warning stream, stderr when null
};

struct CommandResult {
    std::vector<std::string> files_written;
};

// Unconditional coincidence map over every cell of the array.
CommandResult cmd_correlation_map(const config::ExperimentConfig& cfg, const RunOptions& opts);

// Scans the write or read beam across the neighborhood of a target cell and
// reports coincidence rates relative to the aligned position.
CommandResult cmd_crosstalk(const config::ExperimentConfig& cfg, const RunOptions& opts);

// Full tomography of each configured cell pair at one storage time.
CommandResult cmd_entangle(const config::ExperimentConfig& cfg, const RunOptions& opts);

// Storage-time sweep: decay fit for a single cell, fidelity curve for a pair.
CommandResult cmd_storage_scan(const config::ExperimentConfig& cfg, const RunOptions& opts);

// Checks the configuration, reporting derived quantities without simulating.
CommandResult cmd_validate(const config::ExperimentConfig& cfg, const RunOptions& opts);

} // namespace dlcz::commands
