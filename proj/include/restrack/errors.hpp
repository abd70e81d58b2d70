#pragma once

#include <stdexcept>
#include <string>

namespace restrack {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input frequency outside a model's single-mode validity window.
class DomainError : public Error {
public:
    using Error::Error;
};

// Frequency outside a calibration's valid band, or q0+q1*f not positive.
class CalibrationRangeError : public Error {
public:
    using Error::Error;
};

// Measurement with zero (or non-positive) amplitude cannot be inverted.
class DegenerateMeasurementError : public Error {
public:
    using Error::Error;
};

// Measurement lies off the model manifold (e.g. ring-down contamination).
class InconsistentMeasurementError : public Error {
public:
    using Error::Error;
};

// Calibration sweep does not bracket the resonance.
class ResonanceNotBracketedError : public Error {
public:
    using Error::Error;
};

// Iterative fit failed to meet its step tolerance within the iteration cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, double residual_rms)
        : Error(msg), residual_rms(residual_rms) {}
    double residual_rms;
};

class AliasingError : public Error {
public:
    using Error::Error;
};

class ShortWindowError : public Error {
public:
    using Error::Error;
};

class ZeroDriveError : public Error {
public:
    using Error::Error;
};

class NoDataError : public Error {
public:
    using Error::Error;
};

// Configuration document problems; `path` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& path, const std::string& msg)
        : Error(path + ": " + msg), path(path) {}
    std::string path;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace restrack
