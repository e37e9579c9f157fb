#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dlcz/model.hpp"
#include "dlcz/quantum.hpp"
#include "dlcz/random.hpp"
#include "dlcz/sampler.hpp"

namespace dlcz::sequencer {

// Pulse timing for the write-clean attempt cycle. One attempt occupies one
// cycle period, which must be long enough to hold the write pulse, the
// write-to-clean delay, and the clean pulse.
struct TimingConfig {
    double write_pulse_ns = 100.0;
    double write_clean_delay_ns = 500.0;
    double clean_pulse_ns = 100.0;
    double cycle_period_ns = 1000.0;
    std::uint64_t max_attempts = 1000000;

    void validate(const std::string& path = "timing") const;
    double cycle_period_us() const noexcept { return cycle_period_ns * 1e-3; }
};

// open: every trial is a single write-store-read window; the read stage runs
//       whether or not the signal detector fired, and "heralded" just records
//       the signal click. Suitable for unconditional coincidence statistics.
// heralded: write attempts repeat (with cleaning) until a signal click or the
//       attempt cap; only heralded trials proceed to the read stage.
enum class TrialMode { open, heralded };

struct PlanEntry {
    std::string label;
    std::vector<model::CellIndex> cells; // one cell, or two for an entangled pair
    TrialMode mode = TrialMode::open;
    std::uint64_t n_heralds = 0;  // herald quota; 0 defers to n_attempts
    std::uint64_t n_attempts = 0; // exact trial count for open mode when no herald quota
    double storage_time_us = 0.5;
    std::optional<quantum::BasisPair> setting;        // measurement setting (pair entries)
    std::optional<model::CellIndex> scanned;          // crosstalk: cell the scanned beam addresses
    std::optional<sampler::ScanChannel> scan_channel; // crosstalk: which beam is scanned
};

struct TrialRecord {
    std::uint64_t trial_id = 0;
    std::uint64_t attempts = 1;
    bool heralded = false;
    double herald_time_us = 0.0; // attempts * cycle period when heralded, else 0
    double storage_time_us = 0.0;
    std::optional<sampler::TrialOutcome> outcome; // absent iff an unheralded heralded-mode trial
};

struct EntryResult {
    PlanEntry plan;
    std::uint64_t trials = 0;
    std::uint64_t attempts = 0;
    std::uint64_t heralds = 0;
    std::uint64_t c_s = 0;  // trials with a signal click
    std::uint64_t c_i = 0;  // trials with an idler click
    std::uint64_t c_si = 0; // trials with both clicks
    // Pair entries: trials whose joint outcome lies in the signal "+" port and
    // whose idler detector clicked. Other entries: equals c_si.
    std::uint64_t coincidences = 0;
    // attempts_histogram[k] = number of trials that took exactly k attempts.
    std::vector<std::uint64_t> attempts_histogram;
};

inline constexpr const char* storage_time_convention =
    "storage time measured from the heralding write pulse";

struct EventLog {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string convention = storage_time_convention;
    std::vector<EntryResult> entries;
};

// Streaming consumer of per-trial records in deterministic trial order.
class RecordSink {
public:
    virtual ~RecordSink() = default;
    // Called once before any record; entries carry plans with zeroed counts.
    virtual void begin(const EventLog& header) = 0;
    virtual void record(std::size_t entry_index, const TrialRecord& rec) = 0;
    // Called once after the last record with the final aggregates.
    virtual void finish(const EventLog& log) = 0;
};

// Per-trial generative state machine: write attempts retain the excitation
// number needed by the read stage.
class TrialSampler {
public:
    virtual ~TrialSampler() = default;
    virtual void reset() = 0;
    virtual bool write_attempt(rng::Stream& stream) = 0;
    virtual sampler::TrialOutcome read_stage(double t_store_us, rng::Stream& stream) = 0;
};

struct CampaignContext {
    model::PhysicsGrid grid;
    TimingConfig timing;
    std::string config_hash; // copied into the event log header
    double pair_v0 = 1.0;
    double pair_tau_us = 40.0;
    double pair_phi = 0.0;
};

std::unique_ptr<TrialSampler> make_trial_sampler(const PlanEntry& entry,
                                                 const CampaignContext& ctx);

// Signal click probability per write attempt for this entry's configuration.
double analytic_herald_rate(const PlanEntry& entry, const CampaignContext& ctx);

// Runs the write side until a herald (or the attempt cap), then the read stage
// for heralded trials only.
TrialRecord run_heralded_trial(TrialSampler& sampler, const TimingConfig& timing,
                               double storage_time_us, std::uint64_t trial_id,
                               rng::Stream& stream);

// One write-store-read window; the read stage always runs.
TrialRecord run_open_trial(TrialSampler& sampler, const TimingConfig& timing,
                           double storage_time_us, std::uint64_t trial_id,
                           rng::Stream& stream);

// Executes the plan entries in order. Trial t of entry e draws from the
// stream keyed (seed, e, t), so results are identical for any job count and
// any chunk size; records reach the sink in trial order. chunk_size 0 picks a
// default per mode.
EventLog run_campaign(const std::vector<PlanEntry>& plan, const CampaignContext& ctx,
                      std::uint64_t seed, int jobs = 1, RecordSink* sink = nullptr,
                      std::uint64_t chunk_size = 0);

} // namespace dlcz::sequencer
