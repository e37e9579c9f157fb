#include "dlcz/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dlcz::model {

namespace {

void require(bool ok, const std::string& path, const std::string& msg) {
    if (!ok) throw ValidationError(path, msg);
}

void require_prob(double v, const std::string& path, const std::string& name) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, path + "." + name,
            "must be in [0, 1]");
}

} // namespace

void ArrayGeometry::validate(const std::string& path) const {
    require(nx >= 1, path + ".nx", "must be at least 1");
    require(ny >= 1, path + ".ny", "must be at least 1");
    require(std::isfinite(spacing_um) && spacing_um > 0.0, path + ".spacing_um",
            "must be positive");
    require(std::isfinite(write_waist_um) && write_waist_um > 0.0,
            path + ".write_waist_um", "must be positive");
    require(std::isfinite(signal_waist_um) && signal_waist_um > 0.0,
            path + ".signal_waist_um", "must be positive");
    require(std::isfinite(cloud_diameter_mm) && cloud_diameter_mm > 0.0,
            path + ".cloud_diameter_mm", "must be positive");
}

bool ArrayGeometry::grid_exceeds_cloud() const noexcept {
    double extent = double(std::max(nx, ny) - 1) * spacing_um;
    return extent > cloud_diameter_mm * 1000.0;
}

void CellPhysics::validate(const std::string& path) const {
    require_prob(p, path, "p");
    // the thermal-source parametrization loses meaning at p >= 0.5
    require(p < 0.5, path + ".p", "must be below 0.5");
    require_prob(eta_s, path, "eta_s");
    require_prob(eta_i, path, "eta_i");
    require_prob(eta_ret0, path, "eta_ret0");
    require_prob(dark_s, path, "dark_s");
    require_prob(dark_i, path, "dark_i");
    require(std::isfinite(tau_us) && tau_us > 0.0, path + ".tau_us", "must be positive");
    require(std::isfinite(larmor_period_us) && larmor_period_us > 0.0,
            path + ".larmor_period_us", "must be positive");
    require_prob(larmor_visibility, path, "larmor_visibility");
}

void OpticalDepthProfile::validate(const std::string& path) const {
    require(std::isfinite(od_center) && od_center > 0.0, path + ".od_center",
            "must be positive");
    require(std::isfinite(sigma_um) && sigma_um > 0.0, path + ".sigma_um",
            "must be positive");
    require(std::isfinite(od_to_eta) && od_to_eta > 0.0, path + ".od_to_eta",
            "must be positive");
}

std::pair<double, double> cell_position(CellIndex idx, const ArrayGeometry& geo) {
    if (!geo.contains(idx))
        throw BoundsError("cell index (" + std::to_string(idx.x) + "," +
                          std::to_string(idx.y) + ") outside the " +
                          std::to_string(geo.nx) + "x" + std::to_string(geo.ny) + " grid");
    double cx = 0.5 * double(geo.nx + 1);
    double cy = 0.5 * double(geo.ny + 1);
    return {(double(idx.x) - cx) * geo.spacing_um, (double(idx.y) - cy) * geo.spacing_um};
}

double optical_depth(std::pair<double, double> pos_um, const OpticalDepthProfile& profile) {
    double r2 = pos_um.first * pos_um.first + pos_um.second * pos_um.second;
    return profile.od_center * std::exp(-r2 / (2.0 * profile.sigma_um * profile.sigma_um));
}

double larmor_envelope(double t_us, double period_us, double visibility) {
    constexpr double pi = 3.14159265358979323846;
    double c = std::cos(pi * t_us / period_us);
    return (1.0 - visibility) + visibility * c * c;
}

double retrieval_efficiency(const CellPhysics& cell, double od, double t_us,
                            double od_to_eta) {
    if (!(t_us >= 0.0))
        throw ModelError("storage time must be nonnegative");
    if (!(od_to_eta > 0.0))
        throw ModelError("od_to_eta must be positive");
    double saturation = 1.0 - std::exp(-od / od_to_eta);
    double dephasing = std::exp(-(t_us * t_us) / (cell.tau_us * cell.tau_us));
    double env = larmor_envelope(t_us, cell.larmor_period_us, cell.larmor_visibility);
    double eta = cell.eta_ret0 * saturation * dephasing * env;
    if (eta < 0.0) eta = 0.0;
    if (eta > 1.0) eta = 1.0;
    return eta;
}

const CellPhysics& PhysicsGrid::at(CellIndex idx) const {
    if (!geometry.contains(idx))
        throw BoundsError("cell index (" + std::to_string(idx.x) + "," +
                          std::to_string(idx.y) + ") outside the grid");
    return cells[std::size_t(idx.y - 1) * std::size_t(geometry.nx) + std::size_t(idx.x - 1)];
}

double PhysicsGrid::od_at(CellIndex idx) const {
    return optical_depth(cell_position(idx, geometry), profile);
}

PhysicsGrid uniform_grid(const ArrayGeometry& geo, const OpticalDepthProfile& profile,
                         const CellPhysics& tmpl) {
    geo.validate();
    profile.validate();
    tmpl.validate();
    PhysicsGrid grid;
    grid.geometry = geo;
    grid.profile = profile;
    grid.cells.assign(std::size_t(geo.cell_count()), tmpl);
    return grid;
}

} // namespace dlcz::model
