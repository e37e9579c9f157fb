#include "dlcz/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "dlcz/analysis.hpp"
#include "dlcz/errors.hpp"

namespace dlcz::calibration {

void GridTargets::validate() const {
    const auto require = [](bool ok, const std::string& field, const std::string& msg) {
        if (!ok) throw ValidationError("calibration." + field, msg);
    };
    require(gc_center > 1.0, "gc_center", "must exceed the accidental baseline of 1");
    require(gc_edge > 1.0, "gc_edge", "must exceed the accidental baseline of 1");
    require(std::isfinite(gc_center) && std::isfinite(gc_edge), "gc_center", "must be finite");
    require(fit_tau_center_us > 0.0, "fit_tau_center_us", "must be positive");
    require(fit_tau_edge_us > 0.0, "fit_tau_edge_us", "must be positive");
    require(scan_times_us.size() >= 3, "scan_times_us", "needs at least three points");
    for (double t : scan_times_us)
        require(t >= 0.0 && std::isfinite(t), "scan_times_us", "times must be non-negative");
    std::vector<double> sorted = scan_times_us;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "scan_times_us",
            "times must be distinct");
}

namespace {

double gc_at(const model::CellPhysics& base, double eta_ret0, double tau_us, double od,
             double od_to_eta, double t_us) {
    model::CellPhysics cell = base;
    cell.eta_ret0 = eta_ret0;
    cell.tau_us = tau_us;
    return sampler::analytic_rates(cell, od, od_to_eta, t_us).g_c;
}

// Bisects f over [lo, hi]; requires f(lo) and f(hi) to bracket zero.
template <class F>
double bisect(F&& f, double lo, double hi, double f_lo, double f_hi, int iterations) {
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0))
        throw CalibrationError("no sign change over the search bracket");
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if (f_mid == 0.0) return mid;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Retrieval scale that reproduces the target zero-delay rate at the given
// depth, holding the depth-to-efficiency constant fixed; empty when no scale
// in [0, 1] can reach the target.
std::optional<double> try_solve_eta_ret0(const model::CellPhysics& base, double od,
                                         double od_to_eta, double target) {
    const auto f = [&](double eta) { return gc_at(base, eta, base.tau_us, od, od_to_eta, 0.0) - target; };
    const double f0 = f(0.0);
    const double f1 = f(1.0);
    if ((f0 > 0.0) == (f1 > 0.0)) return std::nullopt;
    return bisect(f, 0.0, 1.0, f0, f1, 200);
}

double solve_eta_ret0(const model::CellPhysics& base, double od, double od_to_eta,
                      double target) {
    const std::optional<double> eta = try_solve_eta_ret0(base, od, od_to_eta, target);
    if (!eta)
        throw CalibrationError(
            "no retrieval scale in [0, 1] reaches a zero-delay rate of " + std::to_string(target) +
            "; the detection chain caps it at " +
            std::to_string(gc_at(base, 1.0, base.tau_us, od, od_to_eta, 0.0)));
    return *eta;
}

// Time constant whose analytic decay, fit over the scan grid, reports the
// requested fitted constant.
double solve_tau(const model::CellPhysics& base, double eta_ret0, double od, double od_to_eta,
                 const std::vector<double>& times, double fit_target) {
    const auto fitted_tau = [&](double tau_phys) {
        std::vector<analysis::DecayPoint> pts;
        pts.reserve(times.size());
        for (double t : times)
            pts.push_back({t, gc_at(base, eta_ret0, tau_phys, od, od_to_eta, t), 1.0});
        return analysis::fit_gaussian_decay(pts).tau_us;
    };
    const auto f = [&](double tau_phys) { return fitted_tau(tau_phys) - fit_target; };
    double lo = 0.2 * fit_target;
    double hi = 3.0 * fit_target;
    double f_lo, f_hi;
    try {
        f_lo = f(lo);
        f_hi = f(hi);
    } catch (const Error& err) {
        throw CalibrationError(std::string("decay-shape solve failed at the bracket: ") +
                               err.what());
    }
    if ((f_lo > 0.0) == (f_hi > 0.0))
        throw CalibrationError("no memory constant in [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "] us reproduces a fitted constant of " +
                               std::to_string(fit_target) + " us");
    const double tau = bisect(f, lo, hi, f_lo, f_hi, 60);
    const double residual = std::abs(fitted_tau(tau) - fit_target);
    if (residual > 1e-6 * fit_target)
        throw CalibrationError("decay-shape solve left a residual of " + std::to_string(residual) +
                               " us against a target of " + std::to_string(fit_target) + " us");
    return tau;
}

} // namespace

CalibrationResult calibrate_grid(const model::ArrayGeometry& geometry,
                                 const model::OpticalDepthProfile& profile,
                                 const model::CellPhysics& base, const GridTargets& targets) {
    geometry.validate();
    profile.validate();
    base.validate();
    targets.validate();
    if (!geometry.contains(targets.center) || !geometry.contains(targets.edge))
        throw CalibrationError("reference cells lie outside the array");
    if (targets.center == targets.edge)
        throw CalibrationError("the center and edge reference cells must differ");

    const double ceiling = 1.0 + 1.0 / base.p;
    if (targets.gc_center >= ceiling || targets.gc_edge >= ceiling)
        throw CalibrationError("a target rate of " +
                               std::to_string(std::max(targets.gc_center, targets.gc_edge)) +
                               " exceeds the thermal-statistics ceiling 1 + 1/p = " +
                               std::to_string(ceiling) + " at p = " + std::to_string(base.p));

    const auto [cx, cy] = model::cell_position(targets.center, geometry);
    const auto [ex, ey] = model::cell_position(targets.edge, geometry);
    const double od_center = model::optical_depth({cx, cy}, profile);
    const double od_edge = model::optical_depth({ex, ey}, profile);

    // Outer solve: the depth-to-efficiency constant sets how much weaker the
    // shallower edge cell retrieves; the inner solve re-tunes the retrieval
    // scale to keep the center on target.  Constants so large that even a
    // unit retrieval scale leaves the center short are evaluated at that cap,
    // which keeps the residual defined and lets the bisection contract back
    // into the feasible range.
    const auto edge_residual = [&](double od_to_eta) {
        const double eta =
            try_solve_eta_ret0(base, od_center, od_to_eta, targets.gc_center).value_or(1.0);
        return gc_at(base, eta, base.tau_us, od_edge, od_to_eta, 0.0) - targets.gc_edge;
    };
    const double ode_lo = 1e-3;
    const double ode_hi = 500.0;
    const double f_lo = edge_residual(ode_lo);
    const double f_hi = edge_residual(ode_hi);
    if ((f_lo > 0.0) == (f_hi > 0.0))
        throw CalibrationError(
            "no depth-to-efficiency constant in [" + std::to_string(ode_lo) + ", " +
            std::to_string(ode_hi) + "] reproduces the edge target " +
            std::to_string(targets.gc_edge) + " alongside the center target " +
            std::to_string(targets.gc_center));
    const double od_to_eta = bisect(edge_residual, ode_lo, ode_hi, f_lo, f_hi, 200);
    const double eta_ret0 = solve_eta_ret0(base, od_center, od_to_eta, targets.gc_center);

    const double res_center =
        std::abs(gc_at(base, eta_ret0, base.tau_us, od_center, od_to_eta, 0.0) -
                 targets.gc_center);
    const double res_edge =
        std::abs(gc_at(base, eta_ret0, base.tau_us, od_edge, od_to_eta, 0.0) - targets.gc_edge);
    if (res_center > 1e-6 * targets.gc_center || res_edge > 1e-6 * targets.gc_edge)
        throw CalibrationError("grid solve left residuals of " + std::to_string(res_center) +
                               " (center) and " + std::to_string(res_edge) + " (edge)");

    const double tau_center = solve_tau(base, eta_ret0, od_center, od_to_eta,
                                        targets.scan_times_us, targets.fit_tau_center_us);
    const double tau_edge = solve_tau(base, eta_ret0, od_edge, od_to_eta, targets.scan_times_us,
                                      targets.fit_tau_edge_us);

    model::OpticalDepthProfile solved_profile = profile;
    solved_profile.od_to_eta = od_to_eta;
    model::CellPhysics solved_base = base;
    solved_base.eta_ret0 = eta_ret0;
    CalibrationResult result{model::uniform_grid(geometry, solved_profile, solved_base),
                             eta_ret0, od_to_eta, tau_center, tau_edge};

    const double r_edge = std::hypot(ex, ey);
    if (!(r_edge > 0.0))
        throw CalibrationError("the edge reference cell sits at the array center");
    for (int y = 1; y <= geometry.ny; ++y) {
        for (int x = 1; x <= geometry.nx; ++x) {
            const auto [px, py] = model::cell_position({x, y}, geometry);
            const double frac = std::min(std::hypot(px, py), r_edge) / r_edge;
            const std::size_t flat = static_cast<std::size_t>(y - 1) *
                                         static_cast<std::size_t>(geometry.nx) +
                                     static_cast<std::size_t>(x - 1);
            result.grid.cells[flat].tau_us = tau_center + (tau_edge - tau_center) * frac;
        }
    }
    return result;
}

double calibrate_pair_visibility(const sampler::PairPhysics& pair, double target_fidelity,
                                 double storage_time_us) {
    if (!(target_fidelity > 0.25) || !(target_fidelity <= 1.0))
        throw CalibrationError("the target fidelity must lie in (0.25, 1]");
    if (storage_time_us < 0.0)
        throw CalibrationError("the storage time must be non-negative");
    if (!(pair.tau_pair_us > 0.0))
        throw CalibrationError("the pair coherence time must be positive");

    const double v_eff = (4.0 * target_fidelity - 1.0) / 3.0;
    const double eta_eff = sampler::pair_idler_efficiency(pair, storage_time_us);
    const double dark = 0.5 * (pair.cell_a.dark_i + pair.cell_b.dark_i);
    const double eta_prime = eta_eff * (1.0 - dark);
    if (!(eta_prime > 0.0))
        throw CalibrationError("the idler chain has zero efficiency, no visibility can reach "
                               "the target fidelity");
    const double x = storage_time_us / pair.tau_pair_us;
    const double envelope = std::exp(-x * x) * model::larmor_envelope(
                                                   storage_time_us, pair.cell_a.larmor_period_us,
                                                   pair.cell_a.larmor_visibility);
    if (!(envelope > 0.0))
        throw CalibrationError("the coherence envelope vanishes at the requested storage time");

    const double v0 = v_eff * (eta_prime + 2.0 * dark) / (eta_prime * envelope);
    if (!(v0 > 0.0) || v0 > 1.0)
        throw CalibrationError("the required initial visibility " + std::to_string(v0) +
                               " falls outside (0, 1]; the detection chain is too lossy for a "
                               "fidelity of " + std::to_string(target_fidelity));
    return v0;
}

} // namespace dlcz::calibration
