#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dlcz {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Index outside the grid or outside a fixed table.
class BoundsError : public Error {
public:
    using Error::Error;
};

// Bad configuration or bad input values; carries the offending field path.
class ValidationError : public Error {
public:
    ValidationError(std::string path, const std::string& msg)
        : Error(path.empty() ? msg : path + ": " + msg), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// RF frequency outside the grid tolerance, malformed tone sets, and similar.
class AddressingError : public Error {
public:
    using Error::Error;
};

// Cell pairs this artifact does not address (non axis-aligned superpositions).
class UnsupportedGeometryError : public AddressingError {
public:
    using AddressingError::AddressingError;
};

// Invalid physical state or parameter fed to an exact computation.
class ModelError : public Error {
public:
    using Error::Error;
};

// Requested calibration target cannot be met; the message names the binding
// constraint.
class CalibrationError : public Error {
public:
    using Error::Error;
};

// Estimator preconditions violated (zero singles, zero normalization, ...).
class EstimateError : public Error {
public:
    using Error::Error;
};

// Data unusable for fitting (too few points, no signal above the offset).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

// Nonlinear fit did not converge; carries the last iterate for diagnostics.
class FitError : public Error {
public:
    FitError(const std::string& msg, double g0, double tau, int iters)
        : Error(msg), g0_last(g0), tau_last(tau), iterations(iters) {}
    double g0_last = 0.0;
    double tau_last = 0.0;
    int iterations = 0;
};

// Tomography failures that are not plain validation problems.
class ReconstructionError : public Error {
public:
    using Error::Error;
};

// A tomography input is missing one or more measurement settings.
class IncompleteDataError : public ReconstructionError {
public:
    using ReconstructionError::ReconstructionError;
};

// A campaign entry exhausted its attempt budget; the message names the entry.
class CampaignError : public Error {
public:
    using Error::Error;
};

// File reading/writing problems.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace dlcz
