#include "dlcz/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dlcz/addressing.hpp"
#include "dlcz/errors.hpp"

namespace dlcz::sampler {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

} // namespace

TrialOutcome sample_single_cell(const model::CellPhysics& cell, double od, double od_to_eta,
                                double t_store_us, rng::Stream& stream) {
    cell.validate();
    const std::uint64_t n = stream.thermal(cell.p);

    TrialOutcome out;
    if (n == 0) {
        out.signal_click = stream.bernoulli(cell.dark_s);
    } else {
        const double miss = std::pow(1.0 - cell.eta_s, static_cast<double>(n));
        out.signal_click = stream.bernoulli(1.0 - (1.0 - cell.dark_s) * miss);
    }

    const double retrieval = model::retrieval_efficiency(cell, od, t_store_us, od_to_eta);
    const std::uint64_t m = (n == 0) ? 0 : stream.binomial(n, retrieval);
    if (m == 0) {
        out.idler_click = stream.bernoulli(cell.dark_i);
    } else {
        const double miss = std::pow(1.0 - cell.eta_i, static_cast<double>(m));
        out.idler_click = stream.bernoulli(1.0 - (1.0 - cell.dark_i) * miss);
    }
    return out;
}

RateSet analytic_rates(const model::CellPhysics& cell, double od, double od_to_eta,
                       double t_store_us) {
    cell.validate();
    const double p = cell.p;
    const double retrieval = model::retrieval_efficiency(cell, od, t_store_us, od_to_eta);
    const double beta = cell.eta_i * retrieval; // idler capture per stored excitation

    // Truncate the thermal sum once the remaining tail p^(n_max+1) < 1e-12.
    int n_max = 0;
    if (p > 0.0) {
        n_max = static_cast<int>(std::ceil(std::log(1e-12) / std::log(p))) + 1;
        n_max = std::max(n_max, 1);
    }

    double no_s = 0.0;    // E[(1-eta_s)^n]
    double no_i = 0.0;    // E[(1-beta)^n]
    double no_si = 0.0;   // E[((1-eta_s)(1-beta))^n]
    double weight = 1.0 - p;
    for (int n = 0; n <= n_max; ++n) {
        const double dn = static_cast<double>(n);
        no_s += weight * std::pow(1.0 - cell.eta_s, dn);
        no_i += weight * std::pow(1.0 - beta, dn);
        no_si += weight * std::pow((1.0 - cell.eta_s) * (1.0 - beta), dn);
        weight *= p;
    }

    RateSet r;
    r.p_s = clamp01(1.0 - (1.0 - cell.dark_s) * no_s);
    r.p_i = clamp01(1.0 - (1.0 - cell.dark_i) * no_i);
    r.p_si = clamp01(1.0 - (1.0 - cell.dark_s) * no_s - (1.0 - cell.dark_i) * no_i +
                     (1.0 - cell.dark_s) * (1.0 - cell.dark_i) * no_si);
    r.p_i_given_s = (r.p_s > 0.0) ? r.p_si / r.p_s : 0.0;
    r.g_c = (r.p_s > 0.0 && r.p_i > 0.0) ? r.p_si / (r.p_s * r.p_i) : 0.0;
    return r;
}

double pair_visibility(const PairPhysics& pair, double t_store_us) {
    if (t_store_us < 0.0) throw ModelError("storage time must be non-negative");
    if (pair.v0 < 0.0 || pair.v0 > 1.0) throw ModelError("pair visibility v0 must lie in [0, 1]");
    if (pair.tau_pair_us <= 0.0) throw ModelError("pair coherence time must be positive");
    const double x = t_store_us / pair.tau_pair_us;
    const double env = model::larmor_envelope(t_store_us, pair.cell_a.larmor_period_us,
                                              pair.cell_a.larmor_visibility);
    return clamp01(pair.v0 * std::exp(-x * x) * env);
}

quantum::DensityMatrix pair_state(const PairPhysics& pair, double t_store_us) {
    return quantum::werner(pair_visibility(pair, t_store_us), pair.phi);
}

double pair_herald_rate(const PairPhysics& pair) {
    const RateSet ra = analytic_rates(pair.cell_a, pair.od_a, pair.od_to_eta, 0.0);
    const RateSet rb = analytic_rates(pair.cell_b, pair.od_b, pair.od_to_eta, 0.0);
    return 0.5 * (ra.p_s + rb.p_s);
}

double pair_idler_efficiency(const PairPhysics& pair, double t_store_us) {
    const double ret_a =
        model::retrieval_efficiency(pair.cell_a, pair.od_a, t_store_us, pair.od_to_eta);
    const double ret_b =
        model::retrieval_efficiency(pair.cell_b, pair.od_b, t_store_us, pair.od_to_eta);
    return 0.5 * (pair.cell_a.eta_i * ret_a + pair.cell_b.eta_i * ret_b);
}

std::array<double, 4> pair_outcome_probabilities(const quantum::DensityMatrix& rho,
                                                 const quantum::BasisPair& setting) {
    // Orthogonal complement of cos(theta)|0> + e^{i phi} sin(theta)|1> is the
    // vector at (pi/2 - theta, phi + pi).
    const auto ortho = [](const quantum::QubitBasisVector& b) {
        return quantum::QubitBasisVector{1.5707963267948966 - b.theta,
                                         b.phi + 3.14159265358979323846};
    };
    const quantum::QubitBasisVector so = ortho(setting.signal);
    const quantum::QubitBasisVector ao = ortho(setting.idler);
    return {
        quantum::born_probability(rho, setting.signal, setting.idler),
        quantum::born_probability(rho, setting.signal, ao),
        quantum::born_probability(rho, so, setting.idler),
        quantum::born_probability(rho, so, ao),
    };
}

int sample_pair_outcome(const std::array<double, 4>& probs, rng::Stream& stream) {
    const double total = probs[0] + probs[1] + probs[2] + probs[3];
    if (total <= 0.0) throw ModelError("joint outcome distribution has zero mass");
    const double u = stream.uniform() * total;
    double acc = 0.0;
    for (int k = 0; k < 3; ++k) {
        acc += probs[static_cast<std::size_t>(k)];
        if (u < acc) return k + 1;
    }
    return 4;
}

double pair_idler_click_probability(const PairPhysics& pair, double t_store_us, int outcome) {
    if (outcome < 1 || outcome > 4) throw ModelError("joint outcome index must lie in 1..4");
    const double eta_eff = pair_idler_efficiency(pair, t_store_us);
    const double dark = 0.5 * (pair.cell_a.dark_i + pair.cell_b.dark_i);
    const bool idler_along_plus = (outcome == 1 || outcome == 3);
    return idler_along_plus ? 1.0 - (1.0 - dark) * (1.0 - eta_eff) : dark;
}

TrialOutcome sample_pair_trial(const PairPhysics& pair, const quantum::BasisPair& setting,
                               double t_store_us, rng::Stream& stream) {
    TrialOutcome out;
    const double herald = pair_herald_rate(pair);
    if (!stream.bernoulli(herald)) return out;

    const std::array<double, 4> probs =
        pair_outcome_probabilities(pair_state(pair, t_store_us), setting);
    const int outcome = sample_pair_outcome(probs, stream);

    out.signal_click = true;
    out.pair_basis_outcome = outcome;
    out.idler_click = stream.bernoulli(pair_idler_click_probability(pair, t_store_us, outcome));
    return out;
}

const char* scan_channel_name(ScanChannel c) noexcept {
    return c == ScanChannel::write ? "write" : "read";
}

CrosstalkSetup crosstalk_setup(model::CellIndex target, model::CellIndex scanned,
                               ScanChannel channel, const model::ArrayGeometry& geo,
                               const model::CellPhysics& physics,
                               const model::OpticalDepthProfile& profile) {
    geo.validate();
    physics.validate();
    profile.validate();
    const addressing::Channel ch =
        channel == ScanChannel::write ? addressing::Channel::write : addressing::Channel::read;
    const addressing::AddressingProgram program =
        addressing::single_cell_program(ch, scanned, geo);
    const double w =
        addressing::beam_weight_at_cell(program, target, geo, geo.write_waist_um);

    CrosstalkSetup setup;
    setup.effective = physics;
    setup.od = model::optical_depth(model::cell_position(target, geo), profile);
    setup.od_to_eta = profile.od_to_eta;
    if (channel == ScanChannel::write) {
        setup.effective.p = clamp01(physics.p * w);
    } else {
        setup.effective.eta_ret0 = clamp01(physics.eta_ret0 * w);
    }
    return setup;
}

TrialOutcome sample_crosstalk_trial(const CrosstalkSetup& setup, double t_store_us,
                                    rng::Stream& stream) {
    return sample_single_cell(setup.effective, setup.od, setup.od_to_eta, t_store_us, stream);
}

TrialOutcome sample_crosstalk_trial(model::CellIndex target, model::CellIndex scanned,
                                    ScanChannel channel, const model::ArrayGeometry& geo,
                                    const model::CellPhysics& physics,
                                    const model::OpticalDepthProfile& profile,
                                    double t_store_us, rng::Stream& stream) {
    const CrosstalkSetup setup =
        crosstalk_setup(target, scanned, channel, geo, physics, profile);
    return sample_crosstalk_trial(setup, t_store_us, stream);
}

} // namespace dlcz::sampler
