#pragma once

#include <complex>

#include <Eigen/Dense>

#include "dlcz/errors.hpp"

namespace dlcz::quantum {

using Matrix4c = Eigen::Matrix4cd;
using Matrix2c = Eigen::Matrix2cd;

// Measurement direction on the path qubit: cos(theta)|L> + e^{i phi} sin(theta)|R>.
struct QubitBasisVector {
    double theta = 0.0;
    double phi = 0.0;
};

struct BasisPair {
    QubitBasisVector signal;
    QubitBasisVector idler;
};

// 4x4 density operator in the ordered product basis {LL, LR, RL, RR}.
// Construction enforces hermiticity (1e-12 elementwise), unit trace (1e-12)
// and positive semidefiniteness (eigenvalues >= -1e-10).
class DensityMatrix {
public:
    explicit DensityMatrix(const Matrix4c& m);
    const Matrix4c& matrix() const noexcept { return m_; }
    std::complex<double> operator()(int row, int col) const { return m_(row, col); }

private:
    Matrix4c m_;
};

// Projector onto (|LL> + e^{i phi}|RR>)/sqrt(2).
DensityMatrix bell_state(double phi);

// V * bell_state(phi) + (1 - V) * I/4.
DensityMatrix werner(double visibility, double phi);

// Dephasing-only variant: the bell state with its coherences scaled by V and
// the populations untouched.
DensityMatrix dephased_bell(double visibility, double phi);

Matrix2c projector(const QubitBasisVector& b);
Matrix4c pair_projector(const QubitBasisVector& signal, const QubitBasisVector& idler);

// tr(rho Pi_s x Pi_a), clamped to [0, 1] at the 1e-12 floor.
double born_probability(const DensityMatrix& rho, const QubitBasisVector& signal,
                        const QubitBasisVector& idler);

// Overlap with a maximally entangled target. With optimize_phase the target
// phase is free: (rho_00 + rho_33)/2 + |rho_03|; otherwise the phi = 0 state
// is used: (rho_00 + rho_33)/2 + Re rho_03.
double entanglement_fidelity(const DensityMatrix& rho, bool optimize_phase = true);

} // namespace dlcz::quantum
