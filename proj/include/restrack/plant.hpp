#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "restrack/dsp.hpp"
#include "restrack/errors.hpp"
#include "restrack/modane.hpp"
#include "restrack/rng.hpp"

namespace restrack::plant {

using modane::CalibrationParams;
using modane::ModaneParams;
using modane::kPi;

struct Relaxator {
    double weight = 0.0;
    double tau = 0.0;  // relaxation time constant [s]
};

struct DriveCommand {
    double f = 0.0;  // [Hz]
    double a = 0.0;  // drive amplitude [V]
};

// Virtual sample: single-mode resonator whose (f_res, alpha) soften with
// strain through a bank of relaxators. Conditioning (toward a larger
// shift) runs charge_rate_factor times faster than relaxation; that
// asymmetry is what lets one minute of conditioning produce an hour of
// log-time recovery, as the real material does.
struct PlantConfig {
    ModaneParams base_model{8500.0, 0.15, 0.14, 1, 1.0};
    double v_long = 2380.0;  // longitudinal wave speed [m/s]

    double softening_quadratic = 1.0e13;   // c_q [Hz / strain^2]
    double softening_crossover = 1.0e-6;   // eps_x [strain]
    double damping_gain = 1.5e4;           // d_l [(1/m) / strain]
    double drive_to_strain = 3.0e-8;       // g [strain / V] at resonance
    double noise_rms = 0.5;                // per-sample, fraction of steady rx amplitude
    double monitor_divider = 100.0;        // tx monitor = drive voltage / this
    bool slow_dynamics = true;             // false: bank bypassed, targets applied instantly

    std::vector<Relaxator> relaxators;
    double charge_rate_factor = 400.0;  // conditioning runs at tau/this

    CalibrationParams true_cal;

    // C1 continuation slope of the softening law above the crossover.
    double softening_linear() const { return 2.0 * softening_quadratic * softening_crossover; }

    void validate() const {
        base_model.validate();
        if (!(v_long > 0.0)) throw DomainError("PlantConfig: v_long must be positive");
        if (softening_quadratic < 0.0 || damping_gain < 0.0 || drive_to_strain < 0.0 ||
            noise_rms < 0.0)
            throw DomainError("PlantConfig: gains must be non-negative");
        if (!(softening_crossover > 0.0))
            throw DomainError("PlantConfig: crossover strain must be positive");
        if (!(monitor_divider > 0.0))
            throw DomainError("PlantConfig: monitor_divider must be positive");
        if (!(charge_rate_factor >= 1.0))
            throw DomainError("PlantConfig: charge_rate_factor must be >= 1");
        if (slow_dynamics) {
            if (relaxators.empty()) throw DomainError("PlantConfig: empty relaxator bank");
            double wsum = 0.0;
            double prev = 0.0;
            for (const auto& r : relaxators) {
                if (!(r.tau > 0.0)) throw DomainError("PlantConfig: relaxator tau must be positive");
                if (r.tau < prev) throw DomainError("PlantConfig: relaxators must be tau-sorted");
                prev = r.tau;
                wsum += r.weight;
            }
            if (std::abs(wsum - 1.0) > 1e-9)
                throw DomainError("PlantConfig: relaxator weights must sum to 1");
        }
    }
};

// Log-uniform bank with equal weights.
inline std::vector<Relaxator> make_log_uniform_bank(std::size_t count, double tau_min,
                                                    double tau_max) {
    if (count == 0 || !(tau_min > 0.0) || !(tau_max > tau_min))
        throw DomainError("make_log_uniform_bank: need count >= 1 and 0 < tau_min < tau_max");
    std::vector<Relaxator> bank(count);
    const double w = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(count - 1);
        bank[i] = {w, tau_min * std::pow(tau_max / tau_min, t)};
    }
    return bank;
}

struct PlantState {
    double t = 0.0;           // simulation clock [s]
    double f_res_now = 0.0;   // [Hz]
    double alpha_now = 0.0;   // [1/m]
    std::vector<double> freq_shift;  // per-relaxator carried shift [Hz]
    std::vector<double> damp_shift;  // per-relaxator carried shift [1/m]
    std::complex<double> last_phasor{0.0, 0.0};  // rx steady-state phasor at previous command
    double envelope_level = 1.0;  // 0 right after a command change, -> 1 as transient subsides
    DriveCommand last_drive{0.0, 0.0};

    // Fraction of the instantaneous equilibrium target reached; diagnostic only.
    double conditioning_level(double target_shift) const {
        if (target_shift == 0.0) return 0.0;
        double s = 0.0;
        // freq_shift already carries the weights applied in aggregate(); see Plant::advance
        for (double v : freq_shift) s += v;
        return s / target_shift;
    }
};

struct EquilibriumTargets {
    double dfreq = 0.0;   // [Hz], <= 0 (softening)
    double dalpha = 0.0;  // [1/m], >= 0
};

// Quadratic-to-linear softening law, C1 at the crossover strain.
inline EquilibriumTargets equilibrium_targets(double strain, const PlantConfig& cfg) {
    if (strain < 0.0) throw DomainError("equilibrium_targets: strain must be non-negative");
    EquilibriumTargets out;
    const double cq = cfg.softening_quadratic;
    const double ex = cfg.softening_crossover;
    if (strain <= ex) {
        out.dfreq = -cq * strain * strain;
    } else {
        out.dfreq = -(cq * ex * ex + cfg.softening_linear() * (strain - ex));
    }
    out.dalpha = cfg.damping_gain * strain;
    return out;
}

class Plant {
public:
    explicit Plant(PlantConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        reset();
    }

    const PlantConfig& config() const { return cfg_; }
    const PlantState& state() const { return state_; }

    void reset() {
        state_ = PlantState{};
        state_.f_res_now = cfg_.base_model.f_res;
        state_.alpha_now = cfg_.base_model.alpha;
        const std::size_t n = cfg_.slow_dynamics ? cfg_.relaxators.size() : 0;
        state_.freq_shift.assign(n, 0.0);
        state_.damp_shift.assign(n, 0.0);
    }

    // Peak-normalized steady response magnitude at drive frequency f for
    // the current material state.
    double normalized_response(double f) const {
        const double al = state_.alpha_now * cfg_.base_model.length;
        const double x = kPi * f / state_.f_res_now;
        const double c = std::cosh(al);
        const double cx = std::cos(x);
        return std::sinh(al) / std::sqrt(c * c - cx * cx);
    }

    // Steady-state strain produced by a drive command in the current state.
    double steady_strain(const DriveCommand& drive) const {
        if (drive.a <= 0.0 || drive.f <= 0.0) return 0.0;
        return cfg_.drive_to_strain * drive.a * normalized_response(drive.f);
    }

    // Calibrated steady-state rx phasor (absolute units) for a command.
    std::complex<double> steady_phasor(const DriveCommand& drive) const {
        if (drive.a <= 0.0 || drive.f <= 0.0) return {0.0, 0.0};
        const double al = state_.alpha_now * cfg_.base_model.length;
        const double x = kPi * drive.f / state_.f_res_now;
        const double d = x - kPi * std::round(x / kPi);
        const double c = std::cosh(al);
        const double cx = std::cos(x);
        const double amp = cfg_.true_cal.amp_gain(drive.f) / std::sqrt(c * c - cx * cx);
        const double ph =
            cfg_.true_cal.phase_offset(drive.f) - std::atan(std::tan(d) / std::tanh(al));
        const double a_tx = drive.a / cfg_.monitor_divider;
        return std::polar(a_tx * amp, ph);
    }

    // Transient time constant of the standing wave, tau = Q / (pi f_res)
    // with Q = pi / (2 tanh(alpha L)).
    double transient_tau() const {
        return 1.0 / (2.0 * state_.f_res_now *
                      std::tanh(state_.alpha_now * cfg_.base_model.length));
    }

    // Advance material state and the transient envelope by dt under a
    // constant drive command. First-order relaxation toward the strain's
    // equilibrium targets, integrated exactly over the step.
    void advance(const DriveCommand& drive, double dt) {
        if (!(dt > 0.0)) throw DomainError("Plant::advance: dt must be positive");

        const double strain = steady_strain(drive);
        const EquilibriumTargets eq = equilibrium_targets(strain, cfg_);

        if (cfg_.slow_dynamics) {
            double fsum = 0.0, dsum = 0.0;
            for (std::size_t i = 0; i < cfg_.relaxators.size(); ++i) {
                const Relaxator& r = cfg_.relaxators[i];
                const double ftgt = r.weight * eq.dfreq;
                const double dtgt = r.weight * eq.dalpha;
                const double tau_f = std::abs(ftgt) > std::abs(state_.freq_shift[i])
                                         ? r.tau / cfg_.charge_rate_factor
                                         : r.tau;
                const double tau_d = std::abs(dtgt) > std::abs(state_.damp_shift[i])
                                         ? r.tau / cfg_.charge_rate_factor
                                         : r.tau;
                state_.freq_shift[i] = ftgt + (state_.freq_shift[i] - ftgt) * std::exp(-dt / tau_f);
                state_.damp_shift[i] = dtgt + (state_.damp_shift[i] - dtgt) * std::exp(-dt / tau_d);
                fsum += state_.freq_shift[i];
                dsum += state_.damp_shift[i];
            }
            state_.f_res_now = cfg_.base_model.f_res + fsum;
            state_.alpha_now = cfg_.base_model.alpha + dsum;
        } else {
            state_.f_res_now = cfg_.base_model.f_res + eq.dfreq;
            state_.alpha_now = cfg_.base_model.alpha + eq.dalpha;
        }

        if (drive.f != state_.last_drive.f || drive.a != state_.last_drive.a) {
            state_.envelope_level = 0.0;
            state_.last_drive = drive;
        }
        const double decay = std::exp(-dt / transient_tau());
        const std::complex<double> target = steady_phasor(drive);
        state_.last_phasor = target + (state_.last_phasor - target) * decay;
        state_.envelope_level = 1.0 + (state_.envelope_level - 1.0) * decay;
        state_.t += dt;
    }

    // Generate a tx/rx record of the current state under a command,
    // starting at the present clock. Does not mutate state; the caller
    // advances the clock over the same interval.
    std::pair<dsp::WaveformWindow, dsp::WaveformWindow> synthesize_window(
        const DriveCommand& drive, double duration, double fs, std::uint64_t rng_seed) const {
        if (!(duration > 0.0) || !(fs > 0.0) || duration * fs < 2.0)
            throw DomainError("Plant::synthesize_window: need at least 2 samples");
        if (fs <= 2.0 * drive.f)
            throw AliasingError("Plant::synthesize_window: fs must exceed 2f");

        const std::size_t n = static_cast<std::size_t>(std::llround(duration * fs));
        dsp::WaveformWindow tx{std::vector<double>(n), fs, state_.t};
        dsp::WaveformWindow rx{std::vector<double>(n), fs, state_.t};

        const double a_tx = drive.a / cfg_.monitor_divider;
        const std::complex<double> steady = steady_phasor(drive);
        const std::complex<double> from = state_.last_phasor;
        const double tau = transient_tau();
        const double sigma = cfg_.noise_rms * std::abs(steady);
        GaussianRng rng(rng_seed);

        const double w = dsp::kTwoPi * drive.f / fs;
        for (std::size_t m = 0; m < n; ++m) {
            const double tm = static_cast<double>(m) / fs;
            const double ph = w * static_cast<double>(m);
            tx.samples[m] = a_tx * std::cos(ph);
            const std::complex<double> phasor =
                steady + (from - steady) * std::exp(-tm / tau);
            double v = phasor.real() * std::cos(ph) - phasor.imag() * std::sin(ph);
            if (sigma > 0.0) v += sigma * rng.next_gaussian();
            rx.samples[m] = v;
        }
        return {std::move(tx), std::move(rx)};
    }

private:
    PlantConfig cfg_;
    PlantState state_;
};

}  // namespace restrack::plant
