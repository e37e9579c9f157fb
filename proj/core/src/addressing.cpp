#include "dlcz/addressing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace dlcz::addressing {

namespace {

constexpr double two_pi = 6.28318530717958647692;
constexpr double half_pi = 1.57079632679489661923;

double quantize_phase_deg(double phase_deg, double resolution_deg) {
    double q = std::round(phase_deg / resolution_deg) * resolution_deg;
    q = std::fmod(q, 360.0);
    if (q < 0.0) q += 360.0;
    // a value that rounds up to 360 wraps back to 0
    if (q >= 360.0) q = 0.0;
    return q;
}

void check_band_index(int k) {
    if (k < 1 || k > band_points)
        throw BoundsError("frequency index " + std::to_string(k) + " outside [1, " +
                          std::to_string(band_points) + "]");
}

void check_cell(model::CellIndex cell, const model::ArrayGeometry& geo) {
    if (!geo.contains(cell))
        throw BoundsError("cell (" + std::to_string(cell.x) + "," + std::to_string(cell.y) +
                          ") outside the " + std::to_string(geo.nx) + "x" +
                          std::to_string(geo.ny) + " grid");
}

} // namespace

const char* channel_name(Channel c) noexcept {
    switch (c) {
        case Channel::write: return "write";
        case Channel::read: return "read";
        case Channel::signal: return "signal";
        case Channel::idler: return "idler";
    }
    return "?";
}

double frequency_for_index(int k) {
    check_band_index(k);
    return band_start_mhz + double(k - 1) * band_step_mhz;
}

int index_for_frequency(double f_mhz) {
    int k = int(std::lround((f_mhz - band_start_mhz) / band_step_mhz)) + 1;
    if (k < 1) k = 1;
    if (k > band_points) k = band_points;
    double residual = std::fabs(f_mhz - frequency_for_index(k));
    if (residual > freq_tolerance_mhz + 1e-12)
        throw AddressingError("frequency " + std::to_string(f_mhz) + " MHz is " +
                              std::to_string(residual) +
                              " MHz away from the nearest grid tone, beyond the " +
                              std::to_string(freq_tolerance_mhz) + " MHz tolerance");
    return k;
}

AddressingProgram single_cell_program(Channel channel, model::CellIndex cell,
                                      const model::ArrayGeometry& geo) {
    check_cell(cell, geo);
    AddressingProgram prog;
    prog.channel = channel;
    prog.tones_x.push_back({frequency_for_index(cell.x), 1.0, 0.0});
    prog.tones_y.push_back({frequency_for_index(cell.y), 1.0, 0.0});
    return prog;
}

AddressingProgram superposition_program(Channel channel, model::CellIndex cell_l,
                                        model::CellIndex cell_r,
                                        const SuperpositionBasis& basis,
                                        const model::ArrayGeometry& geo) {
    check_cell(cell_l, geo);
    check_cell(cell_r, geo);
    if (cell_l == cell_r)
        throw AddressingError("superposition program needs two distinct cells");
    bool same_x = cell_l.x == cell_r.x;
    bool same_y = cell_l.y == cell_r.y;
    if (!same_x && !same_y)
        throw UnsupportedGeometryError(
            "cells (" + std::to_string(cell_l.x) + "," + std::to_string(cell_l.y) + ") and (" +
            std::to_string(cell_r.x) + "," + std::to_string(cell_r.y) +
            ") differ on both axes; two-cell superpositions must be axis aligned");
    if (!(basis.theta >= 0.0 && basis.theta <= half_pi + 1e-12))
        throw ValidationError("basis.theta", "must be in [0, pi/2]");
    if (!(basis.phi >= 0.0 && basis.phi < two_pi))
        throw ValidationError("basis.phi", "must be in [0, 2 pi)");

    AddressingProgram prog;
    prog.channel = channel;
    double amp_l = std::cos(basis.theta);
    double amp_r = std::sin(basis.theta);
    double phase_r = quantize_phase_deg(basis.phi * 360.0 / two_pi, prog.phase_resolution_deg);
    if (same_y) {
        prog.tones_x.push_back({frequency_for_index(cell_l.x), amp_l, 0.0});
        prog.tones_x.push_back({frequency_for_index(cell_r.x), amp_r, phase_r});
        prog.tones_y.push_back({frequency_for_index(cell_l.y), 1.0, 0.0});
    } else {
        prog.tones_x.push_back({frequency_for_index(cell_l.x), 1.0, 0.0});
        prog.tones_y.push_back({frequency_for_index(cell_l.y), amp_l, 0.0});
        prog.tones_y.push_back({frequency_for_index(cell_r.y), amp_r, phase_r});
    }
    return prog;
}

double beam_weight_at_cell(const AddressingProgram& program, model::CellIndex target,
                           const model::ArrayGeometry& geo, double waist_um) {
    if (!(waist_um > 0.0))
        throw ValidationError("waist_um", "must be positive");
    check_cell(target, geo);
    auto [tx, ty] = cell_position(target, geo);
    double weight = 0.0;
    // the deflector pair addresses the cartesian product of the axis tones
    for (const RFTone& fx : program.tones_x) {
        for (const RFTone& fy : program.tones_y) {
            model::CellIndex spot{index_for_frequency(fx.freq_mhz),
                                  index_for_frequency(fy.freq_mhz)};
            auto [sx, sy] = cell_position(spot, geo);
            double d2 = (sx - tx) * (sx - tx) + (sy - ty) * (sy - ty);
            double amp2 = fx.amplitude * fx.amplitude * fy.amplitude * fy.amplitude;
            weight += amp2 * std::exp(-2.0 * d2 / (waist_um * waist_um));
        }
    }
    return weight;
}

double net_frequency_shift(const AddressingProgram& mux, const AddressingProgram& demux) {
    if (mux.tones_x.size() != demux.tones_x.size() ||
        mux.tones_y.size() != demux.tones_y.size())
        throw AddressingError("multiplexing and demultiplexing programs have different "
                              "tone counts and cannot be compared");
    double residual = 0.0;
    for (std::size_t i = 0; i < mux.tones_x.size(); ++i)
        residual = std::max(residual,
                            std::fabs(mux.tones_x[i].freq_mhz - demux.tones_x[i].freq_mhz));
    for (std::size_t i = 0; i < mux.tones_y.size(); ++i)
        residual = std::max(residual,
                            std::fabs(mux.tones_y[i].freq_mhz - demux.tones_y[i].freq_mhz));
    return residual;
}

std::string program_summary(const AddressingProgram& program) {
    std::string s = channel_name(program.channel);
    auto append_axis = [&s](const char* axis, const std::vector<RFTone>& tones) {
        s += " ";
        s += axis;
        s += "=";
        for (std::size_t i = 0; i < tones.size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s%.9g:%.9g:%.9g", i ? "," : "",
                          tones[i].freq_mhz, tones[i].amplitude, tones[i].phase_deg);
            s += buf;
        }
    };
    append_axis("x", program.tones_x);
    append_axis("y", program.tones_y);
    return s;
}

} // namespace dlcz::addressing
