#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "dlcz/model.hpp"
#include "dlcz/sampler.hpp"
#include "dlcz/sequencer.hpp"

namespace dlcz::analysis {

struct CountSummary {
    std::uint64_t trials = 0;
    std::uint64_t c_s = 0;
    std::uint64_t c_i = 0;
    std::uint64_t c_si = 0;
    void validate() const;
};

struct GcEstimate {
    double g_c = 0.0;
    double sigma = 0.0;
};

// Normalized coincidence rate g = (C_si * T) / (C_s * C_i) with the Poisson
// error propagated through the three counts.
GcEstimate estimate_gc(const CountSummary& counts);

struct CorrelationMap {
    int nx = 0;
    int ny = 0;
    std::vector<std::optional<GcEstimate>> cells; // row-major, (y-1)*nx + (x-1)
    const std::optional<GcEstimate>& at(model::CellIndex idx) const;
};

// Folds every open-mode single-cell entry of the log into a per-cell estimate;
// entries addressing the same cell pool their counts.
CorrelationMap correlation_map(const sequencer::EventLog& log,
                               const model::ArrayGeometry& geometry);

struct CrosstalkEntry {
    model::CellIndex scanned;
    sampler::ScanChannel channel = sampler::ScanChannel::read;
    std::uint64_t trials = 0;
    std::uint64_t coincidences = 0;
    double rate = 0.0;     // coincidences per trial
    double relative = 0.0; // rate over the target-aligned rate
};

struct CrosstalkMap {
    model::CellIndex target;
    std::vector<CrosstalkEntry> entries;
};

// Collects the scan entries addressing the given target and normalizes each
// coincidence rate by the rate of the entry whose scanned beam sits on the
// target itself.
CrosstalkMap crosstalk_map(const sequencer::EventLog& log, model::CellIndex target);

struct DecayPoint {
    double t_us = 0.0;
    double g_c = 0.0;
    double sigma = 0.0;
};

struct FitResult {
    double g0 = 0.0;
    double tau_us = 0.0;
    std::array<std::array<double, 2>, 2> covariance{}; // order (g0, tau)
    double chi2_reduced = 0.0;
    int iterations = 0;
};

// Weighted Levenberg-Marquardt fit of y(t) = 1 + g0 exp(-t^2 / tau^2).
FitResult fit_gaussian_decay(const std::vector<DecayPoint>& points);

} // namespace dlcz::analysis
