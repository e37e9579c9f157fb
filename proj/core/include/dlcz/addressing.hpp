#pragma once

#include <string>
#include <vector>

#include "dlcz/model.hpp"

namespace dlcz::addressing {

// RF frequency grid of the deflectors: 15 points, 98.1 MHz to 107.9 MHz in
// steps of 0.7 MHz.
inline constexpr double band_start_mhz = 98.1;
inline constexpr double band_step_mhz = 0.7;
inline constexpr int band_points = 15;
inline constexpr double freq_tolerance_mhz = 0.2;

enum class Channel { write, read, signal, idler };
const char* channel_name(Channel c) noexcept;

struct RFTone {
    double freq_mhz = band_start_mhz;
    double amplitude = 1.0;  // in [0, 1]
    double phase_deg = 0.0;  // in [0, 360)
};

struct AddressingProgram {
    Channel channel = Channel::write;
    std::vector<RFTone> tones_x;
    std::vector<RFTone> tones_y;
    double phase_resolution_deg = 0.1;
};

// Superposition weights: cos(theta)|L> + e^{i phi} sin(theta)|R>.
struct SuperpositionBasis {
    double theta = 0.0; // radians, [0, pi/2]
    double phi = 0.0;   // radians, [0, 2 pi)
};

double frequency_for_index(int k);
int index_for_frequency(double f_mhz);

AddressingProgram single_cell_program(Channel channel, model::CellIndex cell,
                                      const model::ArrayGeometry& geo);

// Two tones on the axis along which the cells differ; the common axis keeps a
// single unit tone. The relative phase is quantized to phase_resolution_deg.
AddressingProgram superposition_program(Channel channel, model::CellIndex cell_l,
                                        model::CellIndex cell_r,
                                        const SuperpositionBasis& basis,
                                        const model::ArrayGeometry& geo);

// Intensity weight of the program's beam at a target cell center: sum over
// addressed spots of amplitude^2 * exp(-2 d^2 / waist^2).
double beam_weight_at_cell(const AddressingProgram& program, model::CellIndex target,
                           const model::ArrayGeometry& geo, double waist_um);

// Residual frequency offset between a multiplexing and a demultiplexing
// program: zero for matched programs, otherwise the largest per-tone mismatch
// in MHz.
double net_frequency_shift(const AddressingProgram& mux, const AddressingProgram& demux);

// Compact text form used in event-log headers.
std::string program_summary(const AddressingProgram& program);

} // namespace dlcz::addressing
