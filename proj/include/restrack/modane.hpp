#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>

#include "restrack/dsp.hpp"
#include "restrack/errors.hpp"

namespace restrack::modane {

inline constexpr double kPi = 3.141592653589793238462643383279;

// Intrinsic resonator description for the analytic steady-state model.
struct ModaneParams {
    double f_res = 0.0;   // resonance frequency [Hz]
    double alpha = 0.0;   // damping coefficient [1/m]
    double length = 0.0;  // bar length [m]
    int mode_n = 1;       // longitudinal mode index
    double scale = 1.0;   // source displacement amplitude U0 (normalized)

    double alpha_l() const { return alpha * length; }

    void validate() const {
        if (!(f_res > 0.0)) throw DomainError("ModaneParams: f_res must be positive");
        if (!(alpha > 0.0)) throw DomainError("ModaneParams: alpha must be positive");
        if (!(length > 0.0)) throw DomainError("ModaneParams: length must be positive");
        if (mode_n < 1) throw DomainError("ModaneParams: mode_n must be >= 1");
        if (!(scale > 0.0)) throw DomainError("ModaneParams: scale must be positive");
    }
};

// Affine setup corrections plus the low-amplitude reference model.
// Amplitude correction is multiplicative (q0 + q1*f replaces U0), phase
// correction additive (p0 + p1*f absorbs setup offsets and delays).
struct CalibrationParams {
    double q0 = 1.0;
    double q1 = 0.0;  // [1/Hz]
    double p0 = 0.0;  // [rad]
    double p1 = 0.0;  // [rad/Hz]
    double f_min = 0.0;  // valid band [Hz]
    double f_max = 0.0;
    ModaneParams ref_model;

    double amp_gain(double f) const { return q0 + q1 * f; }
    double phase_offset(double f) const { return p0 + p1 * f; }

    void check_band(double f) const {
        if (f < f_min || f > f_max)
            throw CalibrationRangeError("calibration: frequency outside valid band");
        if (!(amp_gain(f) > 0.0))
            throw CalibrationRangeError("calibration: q0 + q1*f not positive");
    }
};

struct ResponsePoint {
    double amplitude = 0.0;
    double phase = 0.0;  // unwrapped to the branch containing mode_n*pi
};

struct InversionResult {
    double f_res_est = 0.0;
    double alpha_est = 0.0;
    double r_intermediate = 0.0;  // diagnostic, see invert_response
};

// Phase deviation threshold below which the inversion switches to the
// exact resonance limit (alpha from the amplitude alone).
inline constexpr double kPhaseEps = 1e-4;

// Single-mode validity window: |f - f_res| <= 25% of f_res.
inline constexpr double kValidityFraction = 0.25;

namespace detail {

// Reduce x = pi*f/f_res to the detuning angle d in (-pi/2, pi/2] around
// the nearest multiple of pi. Near resonance the multiple is pi itself;
// the +-25% window guarantees we never leave that branch.
inline double detune_angle(double x) {
    return x - kPi * std::round(x / kPi);
}

}  // namespace detail

// Steady-state amplitude/phase response of the bar near its mode.
// Uncalibrated: a = U0 / sqrt(cosh^2(aL) - cos^2(pi f/f_res)),
//               phi = pi n - arctan(tan(pi f/f_res) / tanh(aL)).
// With cal: amplitude gains (q0 + q1 f) in place of U0 and the phase
// becomes p0 + p1 f - arctan(...) (the pi n offset is part of p0 on a
// real setup).
inline ResponsePoint forward_response(double f, const ModaneParams& model,
                                      const std::optional<CalibrationParams>& cal = std::nullopt) {
    model.validate();
    if (std::abs(f - model.f_res) > kValidityFraction * model.f_res)
        throw DomainError("forward_response: frequency outside single-mode validity window");
    if (cal) cal->check_band(f);

    const double x = kPi * f / model.f_res;
    const double d = detail::detune_angle(x);
    const double al = model.alpha_l();
    const double c = std::cosh(al);
    const double cx = std::cos(x);
    const double atan_term = std::atan(std::tan(d) / std::tanh(al));

    ResponsePoint out;
    const double denom = std::sqrt(c * c - cx * cx);
    if (cal) {
        out.amplitude = cal->amp_gain(f) / denom;
        out.phase = cal->phase_offset(f) - atan_term;
    } else {
        out.amplitude = model.scale / denom;
        out.phase = kPi * model.mode_n - atan_term;
    }
    return out;
}

// Local phase-frequency slope at resonance: k = -pi / (f_res tanh(aL)).
inline double phase_slope(double f_res, double alpha, double length) {
    if (!(f_res > 0.0) || !(alpha > 0.0) || !(length > 0.0))
        throw DomainError("phase_slope: all inputs must be positive");
    return -kPi / (f_res * std::tanh(alpha * length));
}

// Geometry subset needed by the inversion.
struct Geometry {
    double length = 0.0;
    int mode_n = 1;
    double scale = 1.0;
};

// Single-point inversion of the forward model: recovers (f_res, alpha)
// from one (amplitude, phase) measurement at drive frequency f.
//
//   r        = sqrt(1 + u^2 + 2 u cos 2phi) - u - cos 2phi,  u = (a/U0)^2
//   tanh(aL) = sqrt(r / (2 sin^2 phi))
//   f_res    = f / (1 - sign(dphi) * arctan(sqrt(r / (2 cos^2 phi))) / pi)
//
// computed against dphi = phi - pi n, with the quotient form of r when
// u is large (direct subtraction loses every significant digit at small
// damping). At |dphi| < kPhaseEps the expressions go 0/0 and the exact
// resonance limit alpha = argsinh(U0/a)/L applies.
inline InversionResult invert_response(const ResponsePoint& point, double f,
                                       const Geometry& geom) {
    if (!(point.amplitude > 0.0))
        throw DegenerateMeasurementError("invert_response: amplitude must be positive");
    if (!(f > 0.0))
        throw DomainError("invert_response: frequency must be positive");
    if (!(geom.length > 0.0) || geom.mode_n < 1 || !(geom.scale > 0.0))
        throw DomainError("invert_response: bad geometry");

    const double dphi = point.phase - kPi * geom.mode_n;
    if (std::abs(dphi) >= kPi / 2.0)
        throw InconsistentMeasurementError(
            "invert_response: phase outside the near-resonance branch");

    InversionResult out;
    if (std::abs(dphi) < kPhaseEps) {
        out.f_res_est = f;
        out.alpha_est = std::asinh(geom.scale / point.amplitude) / geom.length;
        out.r_intermediate = 0.0;
        return out;
    }

    const double u = (point.amplitude / geom.scale) * (point.amplitude / geom.scale);
    const double c2 = std::cos(2.0 * dphi);
    const double s2 = std::sin(2.0 * dphi);
    const double s2sq = s2 * s2;
    const double p = u + c2;
    double r;
    if (p >= 0.0) {
        r = s2sq / (std::sqrt(p * p + s2sq) + p);
    } else {
        r = std::sqrt(p * p + s2sq) - p;
    }
    if (r < 0.0) {
        if (r < -1e-12)
            throw InconsistentMeasurementError("invert_response: negative r beyond tolerance");
        r = 0.0;
    }
    out.r_intermediate = r;

    const double half_sqrt_r = std::sqrt(r / 2.0);
    const double tanh_arg = half_sqrt_r / std::abs(std::sin(dphi));
    if (tanh_arg >= 1.0)
        throw InconsistentMeasurementError(
            "invert_response: measurement off the model manifold (argtanh >= 1)");
    out.alpha_est = std::atanh(tanh_arg) / geom.length;

    const double detune = std::atan(half_sqrt_r / std::abs(std::cos(dphi)));
    const double denom = 1.0 - std::copysign(detune, dphi) / kPi;
    out.f_res_est = f / denom;
    return out;
}

// Calibrated measurement triple from a raw complex transfer.
struct CalibratedMeasurement {
    double amplitude = 0.0;
    double phase = 0.0;      // near-resonance branch around pi n
    double delta_phi = 0.0;  // phase - pi n, in (-pi, pi]
};

// Undo the setup corrections: a = |Z| / (q0 + q1 f), and phases reduced
// so that delta_phi = arg Z - p0 - p1 f falls on the branch around zero.
inline CalibratedMeasurement apply_calibration(std::complex<double> z, double f,
                                               const CalibrationParams& cal) {
    cal.check_band(f);
    CalibratedMeasurement out;
    out.amplitude = std::abs(z) / cal.amp_gain(f);
    const double raw = std::arg(z) - cal.phase_offset(f);
    const double wrapped = raw - 2.0 * kPi * std::round(raw / (2.0 * kPi));
    out.delta_phi = wrapped;
    out.phase = wrapped + kPi * cal.ref_model.mode_n;
    return out;
}

}  // namespace restrack::modane
