#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "restrack/errors.hpp"
#include "restrack/modane.hpp"

namespace restrack::modane {

struct SweepPoint {
    double f = 0.0;
    std::complex<double> z;
};

struct CalibrationFit {
    CalibrationParams params;
    double residual_rms = 0.0;
    int iterations = 0;
};

namespace detail {

// Sequential unwrap: removes 2*pi jumps between consecutive sweep points.
inline std::vector<double> unwrap_phases(const std::vector<SweepPoint>& sweep) {
    std::vector<double> out(sweep.size());
    double acc = std::arg(sweep.front().z);
    double prev_raw = acc;
    out[0] = acc;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        const double raw = std::arg(sweep[i].z);
        double delta = raw - prev_raw;
        delta -= 2.0 * kPi * std::round(delta / (2.0 * kPi));
        acc += delta;
        out[i] = acc;
        prev_raw = raw;
    }
    return out;
}

struct LinReg {
    double intercept = 0.0;
    double slope = 0.0;
};

inline LinReg linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    LinReg r;
    if (denom != 0.0) {
        r.slope = (n * sxy - sx * sy) / denom;
        r.intercept = (sy - r.slope * sx) / n;
    } else {
        r.intercept = sy / n;
    }
    return r;
}

// 6x6 symmetric solve by Gaussian elimination with partial pivoting.
template <std::size_t N>
inline bool solve_dense(std::array<std::array<double, N>, N> a, std::array<double, N>& b) {
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t piv = col;
        for (std::size_t row = col + 1; row < N; ++row)
            if (std::abs(a[row][col]) > std::abs(a[piv][col])) piv = row;
        if (a[piv][col] == 0.0) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t row = col + 1; row < N; ++row) {
            const double m = a[row][col] / a[col][col];
            for (std::size_t k = col; k < N; ++k) a[row][k] -= m * a[col][k];
            b[row] -= m * b[col];
        }
    }
    for (std::size_t col = N; col-- > 0;) {
        for (std::size_t k = col + 1; k < N; ++k) b[col] -= a[col][k] * b[k];
        b[col] /= a[col][col];
    }
    return true;
}

// Parameters during the fit: (f_res, alpha, q0c, q1, p0c, p1) with the
// affine corrections centered at f_c for conditioning; q0 = q0c - q1*f_c.
struct FitModel {
    double length;
    double f_center;

    // residuals: [a_model - a_meas, w_i * (phi_model - phi_meas)] per point
    void residuals(const std::array<double, 6>& th, const std::vector<double>& fs,
                   const std::vector<double>& amp, const std::vector<double>& phase,
                   const std::vector<double>& wph, std::vector<double>& out) const {
        const double f_res = th[0], alpha = th[1];
        const double q0c = th[2], q1 = th[3], p0c = th[4], p1 = th[5];
        const double t = std::tanh(alpha * length);
        const double c = std::cosh(alpha * length);
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const double x = kPi * fs[i] / f_res;
            const double d = x - kPi * std::round(x / kPi);
            const double cx = std::cos(x);
            const double a_model = (q0c + q1 * (fs[i] - f_center)) / std::sqrt(c * c - cx * cx);
            const double ph_model =
                p0c + p1 * (fs[i] - f_center) - std::atan(std::tan(d) / t);
            out[2 * i] = a_model - amp[i];
            out[2 * i + 1] = wph[i] * (ph_model - phase[i]);
        }
    }
};

}  // namespace detail

// Joint amplitude+phase least-squares fit of the calibrated response
// model to a measured sweep. Phase residuals are weighted by the local
// measured amplitude (equalizes the ~1/a phase noise), amplitude
// residuals carry unit weight. Levenberg-Marquardt with a numeric
// Jacobian; stops when the relative parameter step drops below 1e-10.
inline CalibrationFit fit_calibration(const std::vector<SweepPoint>& sweep, double length,
                                      int mode_n) {
    if (sweep.size() < 20)
        throw DomainError("fit_calibration: need at least 20 sweep points");
    if (!(length > 0.0) || mode_n < 1)
        throw DomainError("fit_calibration: bad geometry");

    const std::size_t n = sweep.size();
    std::vector<double> fs(n), amp(n);
    for (std::size_t i = 0; i < n; ++i) {
        fs[i] = sweep[i].f;
        amp[i] = std::abs(sweep[i].z);
    }
    const std::size_t peak =
        static_cast<std::size_t>(std::max_element(amp.begin(), amp.end()) - amp.begin());
    if (peak == 0 || peak == n - 1)
        throw ResonanceNotBracketedError(
            "fit_calibration: amplitude maximum at sweep boundary");

    std::vector<double> phase = detail::unwrap_phases(sweep);

    // --- initial guesses ---
    const double f_res0 = fs[peak];
    // half-power width -> alpha*L ~ pi * FWHM / (2 f_res)
    const double half_power = amp[peak] / std::sqrt(2.0);
    double f_lo = fs.front(), f_hi = fs.back();
    for (std::size_t i = peak; i-- > 0;) {
        if (amp[i] < half_power) {
            const double t = (half_power - amp[i]) / (amp[i + 1] - amp[i]);
            f_lo = fs[i] + t * (fs[i + 1] - fs[i]);
            break;
        }
    }
    for (std::size_t i = peak + 1; i < n; ++i) {
        if (amp[i] < half_power) {
            const double t = (half_power - amp[i - 1]) / (amp[i] - amp[i - 1]);
            f_hi = fs[i - 1] + t * (fs[i] - fs[i - 1]);
            break;
        }
    }
    double alpha0 = kPi * (f_hi - f_lo) / (2.0 * f_res0) / length;
    if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) alpha0 = 0.1 / length;

    // p0/p1 from the model-corrected phase over the outer 25% of the sweep
    const double tanh0 = std::tanh(alpha0 * length);
    std::vector<double> fx, py;
    const std::size_t outer = std::max<std::size_t>(2, n / 8);
    auto corrected = [&](std::size_t i) {
        const double x = kPi * fs[i] / f_res0;
        const double d = x - kPi * std::round(x / kPi);
        return phase[i] + std::atan(std::tan(d) / tanh0);
    };
    for (std::size_t i = 0; i < outer; ++i) {
        fx.push_back(fs[i]);
        py.push_back(corrected(i));
        fx.push_back(fs[n - 1 - i]);
        py.push_back(corrected(n - 1 - i));
    }
    const detail::LinReg preg = detail::linear_regression(fx, py);

    // q0/q1 from amplitude with the model shape divided out
    std::vector<double> qy(n);
    const double c0 = std::cosh(alpha0 * length);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = kPi * fs[i] / f_res0;
        const double cx = std::cos(x);
        qy[i] = amp[i] * std::sqrt(std::max(c0 * c0 - cx * cx, 1e-300));
    }
    const detail::LinReg qreg = detail::linear_regression(fs, qy);

    const double f_center = 0.5 * (fs.front() + fs.back());
    std::array<double, 6> th = {f_res0,
                                alpha0,
                                qreg.intercept + qreg.slope * f_center,
                                qreg.slope,
                                preg.intercept + preg.slope * f_center,
                                preg.slope};
    const std::array<double, 6> th_floor = {
        std::abs(th[0]), std::abs(th[1]), std::max(std::abs(th[2]), 1e-12),
        std::max(std::abs(th[3]), 1e-16), std::max(std::abs(th[4]), 1e-6),
        std::max(std::abs(th[5]), 1e-10)};

    // phase weights: local measured amplitude
    std::vector<double> wph(amp);

    detail::FitModel model{length, f_center};
    const std::size_t m = 2 * n;
    std::vector<double> res(m), res_trial(m);
    std::vector<std::array<double, 6>> jac(m);
    std::vector<double> res_hi(m), res_lo(m);

    auto cost_of = [&](const std::vector<double>& r) {
        double s = 0.0;
        for (double v : r) s += v * v;
        return s;
    };

    model.residuals(th, fs, amp, phase, wph, res);
    double cost = cost_of(res);

    double lambda = 1e-3;
    int iter = 0;
    bool converged = false;
    for (; iter < 200; ++iter) {
        // numeric Jacobian, central differences
        for (std::size_t j = 0; j < 6; ++j) {
            const double h = 6e-6 * std::max(std::abs(th[j]), th_floor[j]);
            std::array<double, 6> tp = th, tm = th;
            tp[j] += h;
            tm[j] -= h;
            model.residuals(tp, fs, amp, phase, wph, res_hi);
            model.residuals(tm, fs, amp, phase, wph, res_lo);
            const double inv = 1.0 / (2.0 * h);
            for (std::size_t i = 0; i < m; ++i) jac[i][j] = (res_hi[i] - res_lo[i]) * inv;
        }
        std::array<std::array<double, 6>, 6> jtj{};
        std::array<double, 6> jtr{};
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t a = 0; a < 6; ++a) {
                jtr[a] += jac[i][a] * res[i];
                for (std::size_t b = a; b < 6; ++b) jtj[a][b] += jac[i][a] * jac[i][b];
            }
        }
        for (std::size_t a = 0; a < 6; ++a)
            for (std::size_t b = 0; b < a; ++b) jtj[a][b] = jtj[b][a];

        bool stepped = false;
        for (int attempt = 0; attempt < 25 && !stepped; ++attempt) {
            auto lhs = jtj;
            for (std::size_t a = 0; a < 6; ++a) lhs[a][a] += lambda * jtj[a][a];
            std::array<double, 6> delta{};
            for (std::size_t a = 0; a < 6; ++a) delta[a] = -jtr[a];
            if (!detail::solve_dense(lhs, delta)) {
                lambda *= 4.0;
                continue;
            }
            std::array<double, 6> trial = th;
            for (std::size_t a = 0; a < 6; ++a) trial[a] += delta[a];
            if (!(trial[0] > 0.0) || !(trial[1] > 0.0)) {
                lambda *= 4.0;
                continue;
            }
            model.residuals(trial, fs, amp, phase, wph, res_trial);
            const double trial_cost = cost_of(res_trial);
            if (trial_cost <= cost) {
                double rel_step = 0.0;
                for (std::size_t a = 0; a < 6; ++a)
                    rel_step = std::max(rel_step, std::abs(delta[a]) /
                                                      std::max(std::abs(th[a]), th_floor[a]));
                th = trial;
                res.swap(res_trial);
                cost = trial_cost;
                lambda = std::max(lambda * 0.3, 1e-14);
                stepped = true;
                if (rel_step < 1e-10) converged = true;
            } else {
                lambda *= 4.0;
            }
        }
        if (converged) break;
        if (!stepped) {
            // no admissible descent step at any damping: treat as converged
            // if the residual gradient is flat, else keep the loop counting
            double grad = 0.0;
            for (double g : jtr) grad = std::max(grad, std::abs(g));
            if (grad < 1e-14 * (1.0 + cost)) {
                converged = true;
                break;
            }
        }
    }

    const double rms = std::sqrt(cost / static_cast<double>(m));
    if (!converged && iter >= 200)
        throw ConvergenceError("fit_calibration: no convergence after 200 iterations", rms);

    CalibrationFit out;
    out.params.q1 = th[3];
    out.params.q0 = th[2] - th[3] * f_center;
    out.params.p1 = th[5];
    out.params.p0 = th[4] - th[5] * f_center;
    out.params.f_min = std::min(fs.front(), fs.back());
    out.params.f_max = std::max(fs.front(), fs.back());
    out.params.ref_model = ModaneParams{th[0], th[1], length, mode_n, 1.0};
    out.residual_rms = rms;
    out.iterations = iter;
    return out;
}

}  // namespace restrack::modane
