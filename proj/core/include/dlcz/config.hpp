#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlcz/calibration.hpp"
#include "dlcz/model.hpp"
#include "dlcz/sampler.hpp"
#include "dlcz/sequencer.hpp"

namespace dlcz::config {

struct CorrelationSection {
    std::uint64_t n_heralds = 10000;
    double storage_time_us = 0.5;
};

struct CrosstalkSection {
    model::CellIndex target{8, 8};
    int radius = 1;
    std::uint64_t attempts = 1000000;
    double storage_time_us = 0.5;
    sampler::ScanChannel channel = sampler::ScanChannel::read;
};

struct EntangleSection {
    std::vector<std::array<model::CellIndex, 2>> pairs;
    std::uint64_t n_heralds_per_setting = 10000;
    double storage_time_us = 0.5;
    double phase_deg = 0.0;
    double tau_pair_us = 40.0;
    std::optional<double> v0; // absent: solved from target_fidelity
    double target_fidelity = 0.90;
    int bootstrap_resamples = 200;
};

struct StorageScanSection {
    std::optional<model::CellIndex> cell;
    std::optional<std::array<model::CellIndex, 2>> pair; // needs the entangle section
    std::vector<double> times_us;
    std::uint64_t n_heralds = 10000;
    int bootstrap_resamples = 100;
};

struct ExperimentConfig {
    model::ArrayGeometry geometry;
    model::OpticalDepthProfile od_profile;
    model::CellPhysics physics;
    sequencer::TimingConfig timing;
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::optional<calibration::GridTargets> calibration;
    std::optional<CorrelationSection> correlation;
    std::optional<CrosstalkSection> crosstalk;
    std::optional<EntangleSection> entangle;
    std::optional<StorageScanSection> storage_scan;
    std::string metadata_json; // free-form object, kept verbatim as serialized text
    std::string hash;          // 16 hex digits over the effective configuration
};

// Parses and validates a JSON configuration. Unknown keys fail with their
// dotted path; a seed override replaces (or supplies) the seed before the
// hash is taken.
ExperimentConfig parse_config_text(const std::string& text,
                                   std::optional<std::uint64_t> seed_override = {});

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override = {});

} // namespace dlcz::config
