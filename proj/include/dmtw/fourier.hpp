#pragma once

// Continuous-transform pair on centered uniform grids, computed with FFTW.
//
//   psi(t)  = (2 pi)^{-1/2} ∫ psi~(w) e^{+i w t} dw
//   psi~(w) = (2 pi)^{-1/2} ∫ psi(t)  e^{-i w t} dt
//
// A spectrum concentrated at +w_c therefore produces a temporal phase that
// grows as +w_c t. Both directions are discretized as Riemann sums on
// conjugate grids (n * dt * dw = 2 pi), which makes the pair exactly inverse
// and norm preserving up to rounding.

#include <fftw3.h>

#include <mutex>

#include "dmtw/wavefunction.hpp"

namespace dmtw {

namespace detail {

inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

/// In-place unnormalized DFT. sign = FFTW_FORWARD (e^{-2 pi i jk/n}) or
/// FFTW_BACKWARD (e^{+2 pi i jk/n}).
inline void dft_in_place(CVector& data, int sign)
{
    if (data.empty()) return;
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan = nullptr;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), p, p, sign, FFTW_ESTIMATE);
    }
    if (plan == nullptr) throw DataError("FFTW failed to create a plan");
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

inline double alternating_sign(std::size_t i) { return (i & 1U) ? -1.0 : 1.0; }

}  // namespace detail

/// Circular convolution y[j] = sum_k kernel[k] * x[(j - k) mod n], real inputs.
inline RVector circular_convolve(std::span<const double> x, std::span<const double> kernel)
{
    if (x.size() != kernel.size()) throw DataError("convolution operands differ in length");
    const std::size_t n = x.size();
    CVector a(x.begin(), x.end());
    CVector b(kernel.begin(), kernel.end());
    detail::dft_in_place(a, FFTW_FORWARD);
    detail::dft_in_place(b, FFTW_FORWARD);
    for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
    detail::dft_in_place(a, FFTW_BACKWARD);
    RVector out(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i].real() * inv_n;
    return out;
}

/// Spectral amplitude -> temporal envelope on the conjugate time grid.
inline TemporalEnvelope spectrum_to_temporal(const SpectralWavefunction& in, double t_center = 0.0)
{
    const FreqGrid& fg = in.grid;
    check_shape(fg.size(), in.amplitudes.size(), "spectrum_to_temporal");
    if (!is_power_of_two(fg.size()) || fg.size() < 4) throw ConfigError("transform grids need a power-of-two size >= 4");

    const TimeGrid tg = fg.conjugate(t_center);
    const std::size_t n = fg.size();
    const double h = static_cast<double>(n / 2);

    CVector buf(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double phase = (static_cast<double>(j) - h) * fg.dw * t_center;
        buf[j] = in.amplitudes[j] * detail::alternating_sign(j) * std::polar(1.0, phase);
    }
    detail::dft_in_place(buf, FFTW_BACKWARD);
    const double scale = fg.dw * kInvSqrt2Pi;
    for (std::size_t k = 0; k < n; ++k) {
        buf[k] *= scale * detail::alternating_sign(k) * std::polar(1.0, fg.w_center * tg.t(k));
    }
    return {tg, std::move(buf)};
}

/// Temporal envelope -> spectral amplitude on the conjugate frequency grid.
inline SpectralWavefunction temporal_to_spectrum(const TemporalEnvelope& in, double w_center = 0.0)
{
    const TimeGrid& tg = in.grid;
    check_shape(tg.size(), in.amplitudes.size(), "temporal_to_spectrum");
    if (!tg.fft_compatible()) throw ConfigError("transform grids need a power-of-two size >= 4");

    const FreqGrid fg = tg.conjugate(w_center);
    const std::size_t n = tg.size();
    const double h = static_cast<double>(n / 2);

    CVector buf(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double phase = -(static_cast<double>(k) - h) * tg.dt * w_center;
        buf[k] = in.amplitudes[k] * detail::alternating_sign(k) * std::polar(1.0, phase);
    }
    detail::dft_in_place(buf, FFTW_FORWARD);
    const double scale = tg.dt * kInvSqrt2Pi;
    for (std::size_t j = 0; j < n; ++j) {
        buf[j] *= scale * detail::alternating_sign(j) * std::polar(1.0, -tg.t_center * fg.w(j));
    }
    return {fg, std::move(buf)};
}

}  // namespace dmtw
