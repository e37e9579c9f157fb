#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dlcz/errors.hpp"

namespace dlcz::model {

// 1-based cell coordinates on the addressing grid.
struct CellIndex {
    int x = 1;
    int y = 1;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

struct ArrayGeometry {
    int nx = 15;
    int ny = 15;
    double spacing_um = 126.0;
    double write_waist_um = 60.0;
    double signal_waist_um = 35.0;
    double cloud_diameter_mm = 3.5;

    void validate(const std::string& path = "geometry") const;
    // True when the grid extent is larger than the cloud; callers should warn
    // but keep going.
    bool grid_exceeds_cloud() const noexcept;
    bool contains(CellIndex idx) const noexcept {
        return idx.x >= 1 && idx.x <= nx && idx.y >= 1 && idx.y <= ny;
    }
    int cell_count() const noexcept { return nx * ny; }
};

struct CellPhysics {
    double p = 0.04;              // excitation probability per write pulse
    double eta_s = 0.5;           // signal detection efficiency
    double eta_i = 0.5;           // idler detection efficiency
    double eta_ret0 = 1.0;        // zero-time retrieval efficiency scale
    double dark_s = 1e-4;         // dark probability per signal gate
    double dark_i = 1e-4;         // dark probability per idler gate
    double tau_us = 27.5;         // Gaussian dephasing time
    double larmor_period_us = 5.8;
    double larmor_visibility = 0.0;

    void validate(const std::string& path = "physics") const;
};

struct OpticalDepthProfile {
    double od_center = 6.0;
    double sigma_um = 875.0;  // Gaussian radius of the cloud
    double od_to_eta = 2.0;   // saturation constant of the OD -> retrieval map

    void validate(const std::string& path = "od_profile") const;
};

// Position of a cell center relative to the grid midpoint, in micrometers.
std::pair<double, double> cell_position(CellIndex idx, const ArrayGeometry& geo);

// od_center * exp(-r^2 / (2 sigma^2)) at the given position.
double optical_depth(std::pair<double, double> pos_um, const OpticalDepthProfile& profile);

// (1 - v) + v cos^2(pi t / T): equals 1 at integer periods, dips to 1 - v at
// half periods.
double larmor_envelope(double t_us, double period_us, double visibility);

// eta_ret0 * (1 - exp(-od/od_to_eta)) * exp(-t^2/tau^2) * larmor_envelope(t).
// od_to_eta comes from the OpticalDepthProfile the od value was computed with.
double retrieval_efficiency(const CellPhysics& cell, double od, double t_us,
                            double od_to_eta);

// Per-cell parameter set for the whole array plus the profile it was built
// from. Calibration produces one of these; uniform_grid spreads a template.
struct PhysicsGrid {
    ArrayGeometry geometry;
    OpticalDepthProfile profile;
    std::vector<CellPhysics> cells; // row-major, index (y-1)*nx + (x-1)

    const CellPhysics& at(CellIndex idx) const;
    double od_at(CellIndex idx) const;
};

PhysicsGrid uniform_grid(const ArrayGeometry& geo, const OpticalDepthProfile& profile,
                         const CellPhysics& tmpl);

} // namespace dlcz::model
