#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "restrack/errors.hpp"

namespace restrack::dsp {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// One recorded piece of a signal, uniformly sampled.
struct WaveformWindow {
    std::vector<double> samples;
    double sample_rate = 0.0;  // [samples/s]
    double start_time = 0.0;   // [s]

    double duration() const {
        return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Polar form of a single-frequency component.
struct ComplexPhasor {
    double magnitude = 0.0;
    double phase = 0.0;  // (-pi, pi]

    std::complex<double> to_complex() const {
        return std::polar(magnitude, phase);
    }
    static ComplexPhasor from_complex(std::complex<double> z) {
        return {std::abs(z), std::arg(z)};
    }
};

// Normalized single-bin projection (2/N) * sum x[m] exp(-j 2 pi f m / fs),
// so a unit bin-aligned cosine reads (1, 0). No window function: the
// commanded frequencies are generally not integer-period, but at ~40+
// periods per window the leakage largely cancels in the tx/rx quotient
// (verified in the test suite).
inline ComplexPhasor single_bin_dft(const WaveformWindow& win, double f) {
    if (f <= 0.0)
        throw DomainError("single_bin_dft: frequency must be positive");
    if (win.sample_rate <= 0.0)
        throw DomainError("single_bin_dft: sample_rate must be positive");
    if (f >= 0.5 * win.sample_rate)
        throw AliasingError("single_bin_dft: frequency at or above Nyquist");
    const std::size_t n = win.samples.size();
    if (n < 2 || f * static_cast<double>(n) / win.sample_rate < 2.0)
        throw ShortWindowError("single_bin_dft: window shorter than 2 periods");

    const double w = kTwoPi * f / win.sample_rate;
    double re = 0.0, im = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
        const double ph = w * static_cast<double>(m);
        re += win.samples[m] * std::cos(ph);
        im -= win.samples[m] * std::sin(ph);
    }
    const double scale = 2.0 / static_cast<double>(n);
    return ComplexPhasor::from_complex({re * scale, im * scale});
}

// Complex transfer Z = DFT(rx) / DFT(tx) at the drive frequency.
inline ComplexPhasor transfer_ratio(const WaveformWindow& tx, const WaveformWindow& rx,
                                    double f, double drive_floor = 1e-12) {
    if (tx.samples.size() != rx.samples.size() || tx.sample_rate != rx.sample_rate)
        throw DomainError("transfer_ratio: tx/rx windows not aligned");
    const ComplexPhasor zt = single_bin_dft(tx, f);
    if (zt.magnitude <= drive_floor)
        throw ZeroDriveError("transfer_ratio: drive amplitude below noise floor");
    const ComplexPhasor zr = single_bin_dft(rx, f);
    return ComplexPhasor::from_complex(zr.to_complex() / zt.to_complex());
}

// Strain at the sample center from end-face velocity amplitude.
inline double velocity_to_strain(double v_amplitude, double v_long) {
    if (v_long <= 0.0)
        throw DomainError("velocity_to_strain: wave speed must be positive");
    return v_amplitude / v_long;
}

}  // namespace restrack::dsp
