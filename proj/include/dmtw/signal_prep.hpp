#pragma once

// Ground-truth states: slit (rect) spectra, coverglass phase steps and the
// stripe mask, all defined through the 4-f map w = alpha * x.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dmtw/fourier.hpp"

namespace dmtw {

/// Variable slit: gap width w and gap-center displacement s in mm, mapped to
/// angular frequency by alpha (rad/ps per mm).
struct SlitSpec {
    double w_mm = 2.0;
    double s_mm = 0.0;
    double alpha = 2.41;

    double width_radps() const { return alpha * w_mm; }
    double center_radps() const { return alpha * s_mm; }

    void validate() const
    {
        if (!(w_mm > 0.0)) throw ConfigError("slit width must be > 0");
        if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
        if (!std::isfinite(s_mm)) throw ConfigError("slit displacement must be finite");
    }
};

/// Maps any angle onto (-pi, pi].
inline double canonical_phase(double theta)
{
    double r = std::remainder(theta, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

/// Phase jump of `step` radians for every w >= boundary.
struct PhaseStepSpec {
    double boundary = 0.0;  // rad/ps
    double step = 0.0;  // rad

    PhaseStepSpec() = default;
    PhaseStepSpec(double boundary_radps, double step_rad)
        : boundary(boundary_radps), step(canonical_phase(step_rad))
    {
    }
};

struct PassBand {
    double center_mm = 0.0;
    double width_mm = 0.0;
};

struct StripeMaskSpec {
    double gap_mm = 0.5;
    std::vector<PassBand> bands;
    std::array<PhaseStepSpec, 2> steps{};
    double alpha = 2.41;

    /// `count` pass-bands of equal width separated by opaque gaps, centered on
    /// the carrier. The two coverglass steps sit in the first two gaps.
    static StripeMaskSpec periodic(double gap_mm, double band_mm, std::size_t count, double alpha,
                                   double step1_rad, double step2_rad)
    {
        if (count == 0) throw ConfigError("stripe mask needs at least one pass-band");
        StripeMaskSpec spec;
        spec.gap_mm = gap_mm;
        spec.alpha = alpha;
        const double pitch = gap_mm + band_mm;
        const double first = -0.5 * pitch * static_cast<double>(count - 1);
        for (std::size_t i = 0; i < count; ++i) {
            spec.bands.push_back({first + pitch * static_cast<double>(i), band_mm});
        }
        const double g1 = count > 1 ? first + 0.5 * pitch : first + 0.5 * band_mm;
        const double g2 = count > 2 ? g1 + pitch : g1 + 0.5 * gap_mm;
        spec.steps = {PhaseStepSpec(alpha * g1, step1_rad), PhaseStepSpec(alpha * g2, step2_rad)};
        return spec;
    }

    void validate() const
    {
        if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
        if (bands.empty()) throw ConfigError("stripe mask needs at least one pass-band");
        for (std::size_t i = 0; i < bands.size(); ++i) {
            if (!(bands[i].width_mm > 0.0)) throw ConfigError("stripe pass-band width must be > 0");
            if (i == 0) continue;
            const auto& a = bands[i - 1];
            const auto& b = bands[i];
            if (!(b.center_mm > a.center_mm)) throw ConfigError("stripe pass-bands must be ordered by center");
            if (a.center_mm + 0.5 * a.width_mm > b.center_mm - 0.5 * b.width_mm) {
                throw ConfigError("stripe pass-bands overlap");
            }
        }
    }
};

namespace detail {

/// Adds `value` times the fractional cell coverage of [lo, hi] to each sample.
/// A sample whose cell is cut exactly in half by an edge receives value / 2.
inline void add_rect(CVector& out, const FreqGrid& g, double lo, double hi, cplx value = 1.0)
{
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double a = std::max(g.w(j) - 0.5 * g.dw, lo);
        const double b = std::min(g.w(j) + 0.5 * g.dw, hi);
        if (b > a) out[j] += value * ((b - a) / g.dw);
    }
}

inline void check_band_on_grid(const FreqGrid& g, double lo, double hi, const char* what)
{
    if (hi - lo < 4.0 * g.dw) {
        throw ConfigError(std::string("grid too coarse: ") + what + " is narrower than 4 frequency samples");
    }
    if (lo < g.lower_edge() || hi > g.upper_edge()) {
        throw ConfigError(std::string(what) + " extends beyond the frequency grid");
    }
}

}  // namespace detail

/// rect[(w - alpha s) / (alpha w)], normalized.
inline SpectralWavefunction slit_spectrum(const SlitSpec& spec, const FreqGrid& grid)
{
    spec.validate();
    const double lo = spec.center_radps() - 0.5 * spec.width_radps();
    const double hi = spec.center_radps() + 0.5 * spec.width_radps();
    detail::check_band_on_grid(grid, lo, hi, "slit band");
    CVector a(grid.size(), 0.0);
    detail::add_rect(a, grid, lo, hi);
    return normalized(SpectralWavefunction{grid, std::move(a)});
}

/// Multiplies every sample at w >= boundary by e^{i step}. Magnitudes are
/// untouched, so a normalized input stays normalized.
inline SpectralWavefunction apply_phase_step(const PhaseStepSpec& spec, SpectralWavefunction in)
{
    check_shape(in.grid.size(), in.amplitudes.size(), "apply_phase_step");
    if (!(spec.boundary >= in.grid.lower_edge() && spec.boundary <= in.grid.upper_edge())) {
        throw ConfigError("phase-step boundary lies outside the frequency grid");
    }
    if (spec.step == 0.0) return in;
    const cplx factor = std::polar(1.0, spec.step);
    for (std::size_t j = 0; j < in.grid.size(); ++j) {
        if (in.grid.w(j) >= spec.boundary) in.amplitudes[j] *= factor;
    }
    return in;
}

inline SpectralWavefunction stripe_mask_spectrum(const StripeMaskSpec& spec, const FreqGrid& grid)
{
    spec.validate();
    CVector a(grid.size(), 0.0);
    for (const auto& band : spec.bands) {
        const double lo = spec.alpha * (band.center_mm - 0.5 * band.width_mm);
        const double hi = spec.alpha * (band.center_mm + 0.5 * band.width_mm);
        detail::check_band_on_grid(grid, lo, hi, "stripe pass-band");
        detail::add_rect(a, grid, lo, hi);
    }
    SpectralWavefunction s{grid, std::move(a)};
    for (const auto& step : spec.steps) s = apply_phase_step(step, std::move(s));
    return normalized(std::move(s));
}

enum class Preparation { slit, slit_glass, stripe };

inline std::string to_string(Preparation p)
{
    switch (p) {
        case Preparation::slit: return "slit";
        case Preparation::slit_glass: return "slit+glass";
        case Preparation::stripe: return "stripe";
    }
    return "?";
}

inline Preparation parse_preparation(const std::string& s)
{
    if (s == "slit") return Preparation::slit;
    if (s == "slit+glass") return Preparation::slit_glass;
    if (s == "stripe") return Preparation::stripe;
    throw ConfigError("unknown preparation '" + s + "' (expected slit, slit+glass or stripe)");
}

/// One of the three state preparations plus the grid it is sampled on.
struct StateSpec {
    Preparation prep = Preparation::slit;
    SlitSpec slit;
    PhaseStepSpec glass{1.2, kPi / 2.0};
    StripeMaskSpec stripe = StripeMaskSpec::periodic(0.5, 0.75, 3, 2.41, kPi / 2.0, kPi / 2.0);
    std::size_t n = 4096;
    double dt_ps = 0.01;

    TimeGrid time_grid() const { return TimeGrid(n, dt_ps); }
    FreqGrid freq_grid() const { return time_grid().conjugate(); }
};

inline SpectralWavefunction prepare_spectrum(const StateSpec& spec)
{
    const FreqGrid grid = spec.freq_grid();
    if (!is_power_of_two(spec.n) || spec.n < 4) throw ConfigError("state grid size n must be a power of two >= 4");
    switch (spec.prep) {
        case Preparation::slit: return slit_spectrum(spec.slit, grid);
        case Preparation::slit_glass: return apply_phase_step(spec.glass, slit_spectrum(spec.slit, grid));
        case Preparation::stripe: return stripe_mask_spectrum(spec.stripe, grid);
    }
    throw ConfigError("unknown preparation");
}

}  // namespace dmtw
