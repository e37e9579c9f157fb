#include "dlcz/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "dlcz/errors.hpp"

namespace dlcz::analysis {

void CountSummary::validate() const {
    if (c_s > trials || c_i > trials)
        throw ValidationError("counts", "singles cannot exceed the trial count");
    if (c_si > std::min(c_s, c_i))
        throw ValidationError("counts", "coincidences cannot exceed either singles count");
}

GcEstimate estimate_gc(const CountSummary& counts) {
    counts.validate();
    if (counts.trials == 0) throw EstimateError("no trials recorded");
    if (counts.c_s == 0 || counts.c_i == 0)
        throw EstimateError("zero singles in one arm, the normalized rate is undefined");
    GcEstimate est;
    const double t = static_cast<double>(counts.trials);
    const double cs = static_cast<double>(counts.c_s);
    const double ci = static_cast<double>(counts.c_i);
    const double csi = static_cast<double>(counts.c_si);
    est.g_c = csi * t / (cs * ci);
    est.sigma = (counts.c_si == 0) ? 0.0 : est.g_c * std::sqrt(1.0 / csi + 1.0 / cs + 1.0 / ci);
    return est;
}

const std::optional<GcEstimate>& CorrelationMap::at(model::CellIndex idx) const {
    if (idx.x < 1 || idx.x > nx || idx.y < 1 || idx.y > ny)
        throw BoundsError("cell (" + std::to_string(idx.x) + "," + std::to_string(idx.y) +
                          ") lies outside the map");
    return cells[static_cast<std::size_t>(idx.y - 1) * static_cast<std::size_t>(nx) +
                 static_cast<std::size_t>(idx.x - 1)];
}

CorrelationMap correlation_map(const sequencer::EventLog& log,
                               const model::ArrayGeometry& geometry) {
    geometry.validate();
    CorrelationMap map;
    map.nx = geometry.nx;
    map.ny = geometry.ny;
    map.cells.assign(static_cast<std::size_t>(geometry.nx) * static_cast<std::size_t>(geometry.ny),
                     std::nullopt);

    std::map<std::pair<int, int>, CountSummary> pooled;
    for (const sequencer::EntryResult& entry : log.entries) {
        if (entry.plan.mode != sequencer::TrialMode::open) continue;
        if (entry.plan.cells.size() != 1 || entry.plan.scanned) continue;
        const model::CellIndex cell = entry.plan.cells.front();
        if (!geometry.contains(cell)) continue;
        CountSummary& sum = pooled[{cell.x, cell.y}];
        sum.trials += entry.trials;
        sum.c_s += entry.c_s;
        sum.c_i += entry.c_i;
        sum.c_si += entry.c_si;
    }
    for (const auto& [key, sum] : pooled) {
        const std::size_t flat =
            static_cast<std::size_t>(key.second - 1) * static_cast<std::size_t>(geometry.nx) +
            static_cast<std::size_t>(key.first - 1);
        map.cells[flat] = estimate_gc(sum);
    }
    return map;
}

CrosstalkMap crosstalk_map(const sequencer::EventLog& log, model::CellIndex target) {
    CrosstalkMap map;
    map.target = target;
    double target_rate = -1.0;
    for (const sequencer::EntryResult& entry : log.entries) {
        if (!entry.plan.scanned || !entry.plan.scan_channel) continue;
        if (entry.plan.cells.size() != 1 || !(entry.plan.cells.front() == target)) continue;
        if (entry.trials == 0)
            throw EstimateError("scan entry '" + entry.plan.label + "' recorded no trials");
        CrosstalkEntry e;
        e.scanned = *entry.plan.scanned;
        e.channel = *entry.plan.scan_channel;
        e.trials = entry.trials;
        e.coincidences = entry.c_si;
        e.rate = static_cast<double>(entry.c_si) / static_cast<double>(entry.trials);
        if (e.scanned == target) target_rate = e.rate;
        map.entries.push_back(e);
    }
    if (map.entries.empty())
        throw EstimateError("the log holds no scan entries for cell (" +
                            std::to_string(target.x) + "," + std::to_string(target.y) + ")");
    if (target_rate < 0.0)
        throw EstimateError("no scan entry aligned with the target cell");
    if (target_rate == 0.0)
        throw EstimateError("the target-aligned scan recorded no coincidences");
    for (CrosstalkEntry& e : map.entries) e.relative = e.rate / target_rate;
    return map;
}

namespace {

struct FitWork {
    std::vector<double> t, y, w; // w = 1/sigma
};

// Residuals r_i = (y_i - f(t_i)) / sigma_i and the weighted Jacobian of
// f(t) = 1 + g0 exp(-t^2/tau^2) with respect to (g0, tau).
double cost_and_system(const FitWork& d, double g0, double tau, double A[2][2], double g[2]) {
    A[0][0] = A[0][1] = A[1][0] = A[1][1] = 0.0;
    g[0] = g[1] = 0.0;
    double cost = 0.0;
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        const double u = d.t[i] / tau;
        const double e = std::exp(-u * u);
        const double r = (d.y[i] - (1.0 + g0 * e)) * d.w[i];
        const double j0 = e * d.w[i];
        const double j1 = g0 * e * (2.0 * d.t[i] * d.t[i] / (tau * tau * tau)) * d.w[i];
        cost += r * r;
        A[0][0] += j0 * j0;
        A[0][1] += j0 * j1;
        A[1][1] += j1 * j1;
        g[0] += j0 * r;
        g[1] += j1 * r;
    }
    A[1][0] = A[0][1];
    return cost;
}

double cost_only(const FitWork& d, double g0, double tau) {
    double cost = 0.0;
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        const double u = d.t[i] / tau;
        const double r = (d.y[i] - (1.0 + g0 * std::exp(-u * u))) * d.w[i];
        cost += r * r;
    }
    return cost;
}

} // namespace

FitResult fit_gaussian_decay(const std::vector<DecayPoint>& points) {
    if (points.size() < 3)
        throw DegenerateDataError("a decay fit needs at least three points");
    FitWork d;
    d.t.reserve(points.size());
    bool any_above_baseline = false;
    for (const DecayPoint& p : points) {
        if (!(std::isfinite(p.t_us) && std::isfinite(p.g_c) && std::isfinite(p.sigma)))
            throw DegenerateDataError("decay points must be finite");
        if (p.t_us < 0.0) throw DegenerateDataError("storage times must be non-negative");
        if (p.sigma <= 0.0) throw DegenerateDataError("every point needs a positive error bar");
        if (p.g_c > 1.0) any_above_baseline = true;
        d.t.push_back(p.t_us);
        d.y.push_back(p.g_c);
        d.w.push_back(1.0 / p.sigma);
    }
    if (!any_above_baseline)
        throw DegenerateDataError("no point rises above the accidental baseline of 1");

    double g0 = *std::max_element(d.y.begin(), d.y.end()) - 1.0;
    double tau = 0.0;
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        if (d.y[i] - 1.0 > g0 / std::exp(1.0)) tau = std::max(tau, d.t[i]);
    }
    if (tau <= 0.0) tau = 0.5 * *std::max_element(d.t.begin(), d.t.end());
    if (tau <= 0.0) throw DegenerateDataError("storage times are all zero");

    const int max_iterations = 200;
    double lambda = 1e-3;
    double A[2][2], grad[2];
    double cost = cost_and_system(d, g0, tau, A, grad);
    int iter = 0;
    bool converged = false;
    for (; iter < max_iterations; ++iter) {
        bool stepped = false;
        for (int tries = 0; tries < 60 && !stepped; ++tries) {
            const double a00 = A[0][0] * (1.0 + lambda);
            const double a11 = A[1][1] * (1.0 + lambda);
            const double det = a00 * a11 - A[0][1] * A[1][0];
            if (det == 0.0 || !std::isfinite(det)) {
                lambda *= 10.0;
                continue;
            }
            const double dg0 = (grad[0] * a11 - A[0][1] * grad[1]) / det;
            const double dtau = (a00 * grad[1] - A[1][0] * grad[0]) / det;
            const double g0_new = g0 + dg0;
            const double tau_new = tau + dtau;
            if (!(tau_new > 0.0) || !std::isfinite(g0_new) || !std::isfinite(tau_new)) {
                lambda *= 10.0;
                continue;
            }
            const double cost_new = cost_only(d, g0_new, tau_new);
            if (cost_new <= cost) {
                const double rel = std::max(std::abs(dg0) / std::max(1.0, std::abs(g0_new)),
                                            std::abs(dtau) / std::max(1.0, std::abs(tau_new)));
                g0 = g0_new;
                tau = tau_new;
                cost = cost_and_system(d, g0, tau, A, grad);
                lambda = std::max(lambda / 10.0, 1e-12);
                stepped = true;
                if (rel < 1e-9) converged = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!stepped || converged) {
            converged = converged || !stepped; // a stuck step at finite lambda is a minimum
            ++iter;
            break;
        }
    }
    if (!converged)
        throw FitError("decay fit failed to converge within " + std::to_string(max_iterations) +
                           " iterations",
                       g0, tau, iter);

    FitResult result;
    result.g0 = g0;
    result.tau_us = tau;
    result.iterations = iter;
    const double det = A[0][0] * A[1][1] - A[0][1] * A[1][0];
    if (det != 0.0 && std::isfinite(det)) {
        result.covariance[0][0] = A[1][1] / det;
        result.covariance[0][1] = -A[0][1] / det;
        result.covariance[1][0] = -A[1][0] / det;
        result.covariance[1][1] = A[0][0] / det;
    }
    result.chi2_reduced = cost / static_cast<double>(points.size() - 2);
    return result;
}

} // namespace dlcz::analysis
