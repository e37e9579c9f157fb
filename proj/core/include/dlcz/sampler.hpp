#pragma once

#include <array>
#include <optional>

#include "dlcz/model.hpp"
#include "dlcz/quantum.hpp"
#include "dlcz/random.hpp"

namespace dlcz::sampler {

struct TrialOutcome {
    bool signal_click = false;
    bool idler_click = false;
    // Joint projective outcome in entangled-pair mode, 1..4 in the order
    // (s+,a+), (s+,a-), (s-,a+), (s-,a-); absent otherwise.
    std::optional<int> pair_basis_outcome;
    friend bool operator==(const TrialOutcome&, const TrialOutcome&) = default;
};

struct RateSet {
    double p_s = 0.0;         // signal click probability per write attempt
    double p_i = 0.0;         // unconditional idler click probability
    double p_i_given_s = 0.0; // idler click probability given a herald
    double p_si = 0.0;        // joint click probability
    double g_c = 0.0;         // p_si / (p_s p_i)
};

// One write-store-read window: draws the pair number n from the thermal law
// (1-p) p^n, applies signal detection, binomial survival of the stored
// excitations at the retrieval efficiency, then idler detection.
TrialOutcome sample_single_cell(const model::CellPhysics& cell, double od, double od_to_eta,
                                double t_store_us, rng::Stream& stream);

// Exact click rates for the same generative model, by enumeration over the
// pair number until the truncated tail mass is below 1e-12.
RateSet analytic_rates(const model::CellPhysics& cell, double od, double od_to_eta,
                       double t_store_us);

// Effective two-cell description used in entangled-pair mode. The shared state
// is werner(V(t), phi) with V(t) = v0 exp(-t^2/tau_pair^2) L(t); the herald
// rate and the idler efficiency average the two cells.
struct PairPhysics {
    model::CellPhysics cell_a, cell_b;
    double od_a = 6.0, od_b = 6.0;
    double od_to_eta = 2.0;
    double v0 = 1.0;
    double tau_pair_us = 40.0;
    double phi = 0.0;
};

double pair_visibility(const PairPhysics& pair, double t_store_us);
quantum::DensityMatrix pair_state(const PairPhysics& pair, double t_store_us);
double pair_herald_rate(const PairPhysics& pair);
double pair_idler_efficiency(const PairPhysics& pair, double t_store_us);

// Born probabilities of the four joint outcomes (s+,a+), (s+,a-), (s-,a+),
// (s-,a-) for the given measurement setting, where "-" denotes the orthogonal
// complement of the setting vector.
std::array<double, 4> pair_outcome_probabilities(const quantum::DensityMatrix& rho,
                                                 const quantum::BasisPair& setting);

// Draws an outcome 1..4 proportional to the entries of probs.
int sample_pair_outcome(const std::array<double, 4>& probs, rng::Stream& stream);

// Idler click probability after the given joint outcome: retrieval efficiency
// applies when the idler landed in the "+" port, dark counts always fire.
double pair_idler_click_probability(const PairPhysics& pair, double t_store_us, int outcome);

// Heralds with the pair's signal rate; on a herald draws the joint projective
// outcome from the Born distribution of pair_state in the given setting, then
// applies idler detection efficiency and dark counts.
TrialOutcome sample_pair_trial(const PairPhysics& pair, const quantum::BasisPair& setting,
                               double t_store_us, rng::Stream& stream);

enum class ScanChannel { write, read };
const char* scan_channel_name(ScanChannel c) noexcept;

// Crosstalk trials reuse the single-cell model with the scanned beam's weight
// at the target folded into the excitation probability (write scans) or the
// retrieval scale (read scans); detection channels keep addressing the target.
struct CrosstalkSetup {
    model::CellPhysics effective;
    double od = 6.0;
    double od_to_eta = 2.0;
};

CrosstalkSetup crosstalk_setup(model::CellIndex target, model::CellIndex scanned,
                               ScanChannel channel, const model::ArrayGeometry& geo,
                               const model::CellPhysics& physics,
                               const model::OpticalDepthProfile& profile);

TrialOutcome sample_crosstalk_trial(const CrosstalkSetup& setup, double t_store_us,
                                    rng::Stream& stream);
TrialOutcome sample_crosstalk_trial(model::CellIndex target, model::CellIndex scanned,
                                    ScanChannel channel, const model::ArrayGeometry& geo,
                                    const model::CellPhysics& physics,
                                    const model::OpticalDepthProfile& profile,
                                    double t_store_us, rng::Stream& stream);

} // namespace dlcz::sampler
