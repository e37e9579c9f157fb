#include "dlcz/quantum.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace dlcz::quantum {

namespace {

constexpr double herm_tol = 1e-12;
constexpr double trace_tol = 1e-12;
constexpr double psd_floor = -1e-10;

} // namespace

DensityMatrix::DensityMatrix(const Matrix4c& m) : m_(m) {
    double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > herm_tol)
        throw ModelError("density matrix is not hermitian (max asymmetry " +
                         std::to_string(herm) + ")");
    double tr_err = std::abs(m_.trace() - std::complex<double>(1.0, 0.0));
    if (tr_err > trace_tol)
        throw ModelError("density matrix trace differs from 1 by " + std::to_string(tr_err));
    Eigen::SelfAdjointEigenSolver<Matrix4c> es(m_, Eigen::EigenvaluesOnly);
    double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < psd_floor)
        throw ModelError("density matrix has negative eigenvalue " + std::to_string(min_eig));
}

DensityMatrix bell_state(double phi) {
    Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
    psi(0) = 1.0 / std::sqrt(2.0);
    psi(3) = std::polar(1.0 / std::sqrt(2.0), phi);
    return DensityMatrix(psi * psi.adjoint());
}

DensityMatrix werner(double visibility, double phi) {
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw ModelError("visibility must be in [0, 1]");
    Matrix4c m = visibility * bell_state(phi).matrix() +
                 (1.0 - visibility) * 0.25 * Matrix4c::Identity();
    return DensityMatrix(m);
}

DensityMatrix dephased_bell(double visibility, double phi) {
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw ModelError("visibility must be in [0, 1]");
    Matrix4c m = bell_state(phi).matrix();
    m(0, 3) *= visibility;
    m(3, 0) *= visibility;
    return DensityMatrix(m);
}

Matrix2c projector(const QubitBasisVector& b) {
    double c = std::cos(b.theta);
    double s = std::sin(b.theta);
    std::complex<double> phase = std::polar(1.0, b.phi);
    Matrix2c p;
    p(0, 0) = c * c;
    p(0, 1) = c * s * std::conj(phase);
    p(1, 0) = c * s * phase;
    p(1, 1) = s * s;
    return p;
}

Matrix4c pair_projector(const QubitBasisVector& signal, const QubitBasisVector& idler) {
    Matrix2c ps = projector(signal);
    Matrix2c pa = projector(idler);
    Matrix4c out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = ps(i, j) * pa;
    return out;
}

double born_probability(const DensityMatrix& rho, const QubitBasisVector& signal,
                        const QubitBasisVector& idler) {
    double p = (rho.matrix() * pair_projector(signal, idler)).trace().real();
    if (p < 0.0 && p > -1e-12) p = 0.0;
    if (p > 1.0 && p < 1.0 + 1e-12) p = 1.0;
    if (p < 0.0 || p > 1.0)
        throw ModelError("born probability " + std::to_string(p) + " outside [0, 1]");
    return p;
}

double entanglement_fidelity(const DensityMatrix& rho, bool optimize_phase) {
    double populations = 0.5 * (rho(0, 0).real() + rho(3, 3).real());
    double coherence = optimize_phase ? std::abs(rho(0, 3)) : rho(0, 3).real();
    double f = populations + coherence;
    if (f < 0.0) f = 0.0;
    if (f > 1.0) f = 1.0;
    return f;
}

} // namespace dlcz::quantum
