#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "dmtw/error.hpp"

namespace dmtw {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;
using RVector = std::vector<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline const double kInvSqrt2Pi = 1.0 / std::sqrt(kTwoPi);

inline bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n)
{
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Uniform 1-D axis. Sample i sits at center + (i - n/2) * step, so for even n
/// the center coincides with sample n/2.
struct UniformAxis {
    std::size_t n = 0;
    double step = 0.0;
    double center = 0.0;

    double at(std::size_t i) const
    {
        return center + (static_cast<double>(i) - static_cast<double>(n / 2)) * step;
    }
    double front() const { return at(0); }
    double back() const { return at(n - 1); }
    double lower_edge() const { return front() - 0.5 * step; }
    double upper_edge() const { return back() + 0.5 * step; }
    double span() const { return static_cast<double>(n) * step; }

    /// Index of the sample nearest to x, clamped to the axis.
    std::size_t nearest(double x) const
    {
        const double k = std::round((x - center) / step) + static_cast<double>(n / 2);
        if (k <= 0.0) return 0;
        if (k >= static_cast<double>(n - 1)) return n - 1;
        return static_cast<std::size_t>(k);
    }

    bool same_as(const UniformAxis& o, double rel_tol = 1e-12) const
    {
        const double scale = std::max(std::abs(step), std::abs(o.step));
        return n == o.n && std::abs(step - o.step) <= rel_tol * scale &&
               std::abs(center - o.center) <= rel_tol * std::max(scale, std::abs(center));
    }
};

struct FreqGrid;

/// Delay axis in picoseconds.
struct TimeGrid {
    std::size_t n_samples = 0;
    double dt = 0.0;  // ps
    double t_center = 0.0;  // ps

    TimeGrid() = default;
    TimeGrid(std::size_t n, double dt_ps, double center_ps = 0.0)
        : n_samples(n), dt(dt_ps), t_center(center_ps)
    {
        if (n < 2) throw ConfigError("time grid needs at least 2 samples");
        if (!(dt_ps > 0.0) || !std::isfinite(dt_ps)) throw ConfigError("time grid dt must be > 0");
    }

    UniformAxis axis() const { return {n_samples, dt, t_center}; }
    double t(std::size_t i) const { return axis().at(i); }
    std::size_t size() const { return n_samples; }
    double span() const { return static_cast<double>(n_samples) * dt; }
    bool fft_compatible() const { return n_samples >= 4 && is_power_of_two(n_samples); }

    RVector times() const
    {
        RVector out(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) out[i] = t(i);
        return out;
    }

    FreqGrid conjugate(double w_center = 0.0) const;

    bool operator==(const TimeGrid&) const = default;
};

/// Angular-frequency axis in rad/ps, relative to the carrier.
struct FreqGrid {
    std::size_t n_samples = 0;
    double dw = 0.0;  // rad/ps
    double w_center = 0.0;  // rad/ps

    FreqGrid() = default;
    FreqGrid(std::size_t n, double dw_radps, double center_radps = 0.0)
        : n_samples(n), dw(dw_radps), w_center(center_radps)
    {
        if (n < 2) throw ConfigError("frequency grid needs at least 2 samples");
        if (!(dw_radps > 0.0) || !std::isfinite(dw_radps)) throw ConfigError("frequency grid dw must be > 0");
    }

    UniformAxis axis() const { return {n_samples, dw, w_center}; }
    double w(std::size_t i) const { return axis().at(i); }
    std::size_t size() const { return n_samples; }
    double lower_edge() const { return axis().lower_edge(); }
    double upper_edge() const { return axis().upper_edge(); }

    RVector frequencies() const
    {
        RVector out(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) out[i] = w(i);
        return out;
    }

    TimeGrid conjugate(double t_center = 0.0) const
    {
        return TimeGrid(n_samples, kTwoPi / (static_cast<double>(n_samples) * dw), t_center);
    }

    bool operator==(const FreqGrid&) const = default;
};

inline FreqGrid TimeGrid::conjugate(double w_center) const
{
    return FreqGrid(n_samples, kTwoPi / (static_cast<double>(n_samples) * dt), w_center);
}

/// sin(x)/x, with the removable singularity handled by a short series.
inline double sinc(double x)
{
    const double ax = std::abs(x);
    if (ax < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

/// Sum |a|^2 * step.
inline double norm_squared(std::span<const cplx> a, double step)
{
    double s = 0.0;
    for (const auto& v : a) s += std::norm(v);
    return s * step;
}

/// Ratio of the largest edge magnitude to the peak magnitude. Envelopes meant
/// to be fully contained by the grid should keep this below ~1e-6.
inline double edge_to_peak_ratio(std::span<const cplx> a)
{
    double peak = 0.0;
    for (const auto& v : a) peak = std::max(peak, std::abs(v));
    if (a.empty() || peak == 0.0) return 0.0;
    return std::max(std::abs(a.front()), std::abs(a.back())) / peak;
}

}  // namespace dmtw
