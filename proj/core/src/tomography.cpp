#include "dlcz/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dlcz/errors.hpp"
#include "dlcz/random.hpp"

namespace dlcz::tomography {

namespace {
constexpr double pi = 3.14159265358979323846;
}

std::array<quantum::QubitBasisVector, 4> canonical_single_bases() {
    return {{
        {0.0, 0.0},           // L: the |0> pole
        {0.5 * pi, 0.0},      // R: the |1> pole
        {0.25 * pi, 0.0},     // +: (|0> + |1>) / sqrt(2)
        {0.25 * pi, 1.5 * pi} // -i: (|0> - i |1>) / sqrt(2)
    }};
}

const char* single_basis_name(int i) {
    switch (i) {
    case 0: return "L";
    case 1: return "R";
    case 2: return "+";
    case 3: return "-i";
    default: throw BoundsError("single-basis index must lie in 0..3");
    }
}

std::array<quantum::BasisPair, 16> canonical_bases() {
    const std::array<quantum::QubitBasisVector, 4> singles = canonical_single_bases();
    std::array<quantum::BasisPair, 16> out;
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 4; ++a)
            out[static_cast<std::size_t>(4 * s + a)] = {singles[static_cast<std::size_t>(s)],
                                                        singles[static_cast<std::size_t>(a)]};
    return out;
}

std::array<quantum::Matrix4c, 16> canonical_projectors() {
    const std::array<quantum::BasisPair, 16> bases = canonical_bases();
    std::array<quantum::Matrix4c, 16> out;
    for (int k = 0; k < 16; ++k)
        out[static_cast<std::size_t>(k)] =
            quantum::pair_projector(bases[static_cast<std::size_t>(k)].signal,
                                    bases[static_cast<std::size_t>(k)].idler);
    return out;
}

std::string basis_name(int k) {
    if (k < 0 || k > 15) throw BoundsError("joint-basis index must lie in 0..15");
    return std::string("signal=") + single_basis_name(k / 4) + " idler=" +
           single_basis_name(k % 4);
}

void CountsTable::validate() const {
    double total = 0.0;
    for (double v : n) {
        if (!std::isfinite(v) || v < 0.0)
            throw ValidationError("counts", "entries must be finite and non-negative");
        total += v;
    }
    if (!(total > 0.0)) throw ValidationError("counts", "all sixteen counts are zero");
}

TomographyResult mle_reconstruct(const CountsTable& counts, double tol, int max_iterations) {
    counts.validate();
    if (max_iterations < 1) throw ReconstructionError("the iteration cap must be at least 1");
    if (!(tol > 0.0)) throw ReconstructionError("the convergence tolerance must be positive");
    const std::array<quantum::Matrix4c, 16> proj = canonical_projectors();
    double n_total = 0.0;
    for (double v : counts.n) n_total += v;

    // The settings are not a resolution of the identity, so the likelihood
    // profiles the flux out by normalizing the sixteen probabilities. Its
    // stationary states satisfy m rho = rho with m = (S/N) T^-1 R,
    // R = sum_k (n_k / p_k) P_k and T = sum_k P_k, which provides both the
    // convergence residual and the update rho <- M rho M^dagger with
    // M = I + lambda (m - I): positive for any relaxation factor lambda, a
    // fixed point at every stationary state, and fast when lambda adapts.
    quantum::Matrix4c basis_sum = quantum::Matrix4c::Zero();
    for (const quantum::Matrix4c& P : proj) basis_sum += P;
    const quantum::Matrix4c basis_sum_inv = basis_sum.inverse();

    quantum::Matrix4c rho = quantum::Matrix4c::Identity() * 0.25;

    const auto probabilities = [&](const quantum::Matrix4c& r, std::array<double, 16>& p) {
        double sum = 0.0;
        for (int k = 0; k < 16; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            p[kk] = std::max(0.0, (r * proj[kk]).trace().real());
            sum += p[kk];
        }
        return sum;
    };
    const auto log_likelihood = [&](const std::array<double, 16>& p, double sum) {
        double ll = 0.0;
        for (int k = 0; k < 16; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            if (counts.n[kk] > 0.0) ll += counts.n[kk] * std::log(std::max(p[kk], 1e-300));
        }
        return ll - n_total * std::log(std::max(sum, 1e-300));
    };

    std::array<double, 16> p{};
    double p_sum = probabilities(rho, p);
    double ll = log_likelihood(p, p_sum);

    int iter = 0;
    bool converged = false;
    double lambda = 1.0;
    for (; iter < max_iterations; ++iter) {
        quantum::Matrix4c r_op = quantum::Matrix4c::Zero();
        for (int k = 0; k < 16; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            if (counts.n[kk] > 0.0) r_op += (counts.n[kk] / std::max(p[kk], 1e-12)) * proj[kk];
        }
        const quantum::Matrix4c m = (p_sum / n_total) * (basis_sum_inv * r_op);
        const double resid = (m * rho - rho).norm();
        if (resid <= tol) {
            converged = true;
            break;
        }

        bool accepted = false;
        while (lambda >= 1e-14) {
            const quantum::Matrix4c amp =
                quantum::Matrix4c::Identity() + lambda * (m - quantum::Matrix4c::Identity());
            quantum::Matrix4c cand = amp * rho * amp.adjoint();
            cand = 0.5 * (cand + cand.adjoint().eval());
            const double tr = cand.trace().real();
            if (tr > 0.0) {
                cand /= tr;
                std::array<double, 16> p_new{};
                const double sum_new = probabilities(cand, p_new);
                const double ll_new = log_likelihood(p_new, sum_new);
                if (ll_new > ll) {
                    rho = cand;
                    p = p_new;
                    p_sum = sum_new;
                    ll = ll_new;
                    lambda = std::min(lambda * 1.5, 1e8);
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            converged = true; // no relaxation improves the likelihood at machine precision
            break;
        }
    }

    TomographyResult result{quantum::DensityMatrix(rho),
                            ll,
                            quantum::entanglement_fidelity(quantum::DensityMatrix(rho), true),
                            quantum::entanglement_fidelity(quantum::DensityMatrix(rho), false),
                            0.0,
                            iter,
                            converged};
    return result;
}

double poisson_bootstrap(const CountsTable& counts, int n_resamples, std::uint64_t seed,
                         bool optimize_phase) {
    counts.validate();
    if (n_resamples < 100)
        throw ReconstructionError("at least 100 bootstrap resamples are required");
    std::vector<double> fidelities;
    fidelities.reserve(static_cast<std::size_t>(n_resamples));
    int failures = 0;
    for (int r = 0; r < n_resamples; ++r) {
        rng::Stream stream = rng::Stream::from(seed, 0xB007, static_cast<std::uint64_t>(r));
        CountsTable resampled;
        for (int k = 0; k < 16; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            resampled.n[kk] = static_cast<double>(stream.poisson(counts.n[kk]));
        }
        try {
            const TomographyResult res = mle_reconstruct(resampled);
            fidelities.push_back(optimize_phase ? res.fidelity : res.fidelity_fixed_phase);
        } catch (const Error&) {
            ++failures;
        }
    }
    if (failures * 20 > n_resamples)
        throw ReconstructionError("more than 5% of bootstrap resamples failed to reconstruct");
    if (fidelities.size() < 2)
        throw ReconstructionError("too few bootstrap resamples succeeded");
    double mean = 0.0;
    for (double f : fidelities) mean += f;
    mean /= static_cast<double>(fidelities.size());
    double var = 0.0;
    for (double f : fidelities) var += (f - mean) * (f - mean);
    var /= static_cast<double>(fidelities.size() - 1);
    return std::sqrt(var);
}

TomographyResult tomography_from_log(const sequencer::EventLog& log, model::CellIndex cell_a,
                                     model::CellIndex cell_b, double storage_time_us,
                                     int n_resamples, std::uint64_t seed, bool optimize_phase) {
    const std::array<quantum::BasisPair, 16> bases = canonical_bases();
    const auto vectors_match = [](const quantum::QubitBasisVector& a,
                                  const quantum::QubitBasisVector& b) {
        return std::abs(a.theta - b.theta) <= 1e-9 && std::abs(a.phi - b.phi) <= 1e-9;
    };

    CountsTable counts;
    std::array<bool, 16> found{};
    for (const sequencer::EntryResult& entry : log.entries) {
        if (entry.plan.cells.size() != 2 || !entry.plan.setting) continue;
        if (!(entry.plan.cells[0] == cell_a) || !(entry.plan.cells[1] == cell_b)) continue;
        if (std::abs(entry.plan.storage_time_us - storage_time_us) > 1e-9) continue;
        for (int k = 0; k < 16; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            if (vectors_match(entry.plan.setting->signal, bases[kk].signal) &&
                vectors_match(entry.plan.setting->idler, bases[kk].idler)) {
                counts.n[kk] += static_cast<double>(entry.coincidences);
                found[kk] = true;
                break;
            }
        }
    }

    std::string missing;
    for (int k = 0; k < 16; ++k) {
        if (!found[static_cast<std::size_t>(k)]) {
            if (!missing.empty()) missing += ", ";
            missing += basis_name(k);
        }
    }
    if (!missing.empty())
        throw IncompleteDataError("the log lacks settings: " + missing);

    TomographyResult result = mle_reconstruct(counts);
    result.fidelity_sigma = poisson_bootstrap(counts, n_resamples, seed, optimize_phase);
    return result;
}

} // namespace dlcz::tomography
