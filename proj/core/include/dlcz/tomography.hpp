#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "dlcz/model.hpp"
#include "dlcz/quantum.hpp"
#include "dlcz/sequencer.hpp"

namespace dlcz::tomography {

// Single-qubit analysis settings, in canonical order: the two circular
// polarizations, then the linear diagonal, then the circular-diagonal "-i".
std::array<quantum::QubitBasisVector, 4> canonical_single_bases();
const char* single_basis_name(int i);

// The sixteen joint settings in signal-major order, k = 4 * i_signal + i_idler.
std::array<quantum::BasisPair, 16> canonical_bases();
std::array<quantum::Matrix4c, 16> canonical_projectors();
std::string basis_name(int k);

struct CountsTable {
    std::array<double, 16> n{};
    void validate() const;
};

struct TomographyResult {
    quantum::DensityMatrix rho;
    double log_likelihood = 0.0;
    double fidelity = 0.0;             // against the best-phase Bell state
    double fidelity_fixed_phase = 0.0; // against the phase-zero Bell state
    double fidelity_sigma = 0.0;       // filled by the bootstrap paths
    int iterations = 0;
    bool converged = false;
};

// Maximum-likelihood state reconstruction from the sixteen coincidence
// counts under a Poisson model with the total flux profiled out. Iterates
// relaxed multiplicative updates from the maximally mixed state until the
// stationarity residual of the likelihood drops below tol (or no update can
// improve it at machine precision); hitting the iteration cap first reports
// converged = false rather than failing.
TomographyResult mle_reconstruct(const CountsTable& counts, double tol = 1e-7,
                                 int max_iterations = 50000);

// Standard deviation of the reconstructed fidelity over n_resamples tables
// redrawn with independent Poisson counts around the observed ones.
double poisson_bootstrap(const CountsTable& counts, int n_resamples, std::uint64_t seed,
                         bool optimize_phase = true);

// Pulls the sixteen canonical-setting coincidence counts for the given pair
// and storage time out of a campaign log, reconstructs the state, and
// attaches the bootstrap error bar.
TomographyResult tomography_from_log(const sequencer::EventLog& log, model::CellIndex cell_a,
                                     model::CellIndex cell_b, double storage_time_us,
                                     int n_resamples, std::uint64_t seed,
                                     bool optimize_phase = true);

} // namespace dlcz::tomography
