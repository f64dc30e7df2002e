#pragma once

// Measurement side: polarization-dependent frequency filter acting on the H
// branch, projection onto D/A/R/L, finite-width time gate, photon counting.

#include <array>
#include <cstdint>
#include <optional>
#include <random>

#include "dmtw/random.hpp"
#include "dmtw/signal_prep.hpp"

namespace dmtw {

enum class Polarization { D = 0, A = 1, R = 2, L = 3 };

inline constexpr std::array<Polarization, 4> kPolarizations{Polarization::D, Polarization::A, Polarization::R,
                                                            Polarization::L};

inline std::size_t index_of(Polarization p) { return static_cast<std::size_t>(p); }

inline char to_char(Polarization p) { return "DARL"[index_of(p)]; }

inline Polarization parse_polarization(const std::string& s)
{
    if (s == "D") return Polarization::D;
    if (s == "A") return Polarization::A;
    if (s == "R") return Polarization::R;
    if (s == "L") return Polarization::L;
    throw DataError("unknown polarization '" + s + "'");
}

/// Interference phase difference realized by each projection.
inline double interference_phase(Polarization p)
{
    constexpr std::array<double, 4> theta{0.0, kPi, kPi / 2.0, 3.0 * kPi / 2.0};
    return theta[index_of(p)];
}

/// <phi|V> for D=(H+V)/√2, A=(H-V)/√2, R=(H+iV)/√2, L=(H-iV)/√2. <phi|H> is
/// 1/√2 for all four.
inline cplx v_projection(Polarization p)
{
    const double r = 1.0 / std::sqrt(2.0);
    switch (p) {
        case Polarization::D: return {r, 0.0};
        case Polarization::A: return {-r, 0.0};
        case Polarization::R: return {0.0, -r};
        case Polarization::L: return {0.0, r};
    }
    return {};
}

inline double h_projection(Polarization) { return 1.0 / std::sqrt(2.0); }

/// Rect frequency filter on the H branch.
struct FilterSpec {
    double delta_w = 1.08;  // full width, rad/ps
    double center = 0.0;  // rad/ps

    void validate() const
    {
        if (!(delta_w > 0.0) || !std::isfinite(delta_w)) throw ConfigError("filter width must be > 0");
        if (!std::isfinite(center)) throw ConfigError("filter center must be finite");
    }
};

enum class GateShape { gaussian, delta };

struct GateSpec {
    GateShape shape = GateShape::gaussian;
    double fwhm_ps = 0.0792;

    void validate() const
    {
        if (shape == GateShape::gaussian && !(fwhm_ps > 0.0)) throw ConfigError("gaussian gate FWHM must be > 0");
    }
};

enum class ReferenceMode {
    exact,  // integrate the filtered spectrum as it is
    constant_spectrum,  // psi~ frozen at the filter center across the band
};

struct ReferenceEnvelope {
    TimeGrid grid;
    CVector amplitudes;
    /// max|f| relative to a constant spectrum at the spectral peak.
    double strength = 0.0;
    bool low_reference = false;
};

/// Reference strength below which filtered_reference flags the result.
inline constexpr double kLowReferenceRatio = 0.1;

/// Temporal amplitude of the filtered H branch,
///   f(t) = (2 pi)^{-1/2} ∫ rect((w - c)/dw) psi~(w) e^{i w t} dw.
/// Spectral samples are taken as constant across their cells, and each cell's
/// overlap with the filter is integrated in closed form.
inline ReferenceEnvelope filtered_reference(const SpectralWavefunction& signal, const FilterSpec& filter,
                                            ReferenceMode mode = ReferenceMode::exact, double t_center = 0.0)
{
    filter.validate();
    const FreqGrid& fg = signal.grid;
    check_shape(fg.size(), signal.amplitudes.size(), "filtered_reference");
    if (filter.delta_w < 2.0 * fg.dw) throw ConfigError("filter narrower than 2 frequency samples");
    const double lo = filter.center - 0.5 * filter.delta_w;
    const double hi = filter.center + 0.5 * filter.delta_w;
    if (lo < fg.lower_edge() || hi > fg.upper_edge()) throw ConfigError("filter extends beyond the frequency grid");

    const TimeGrid tg = fg.conjugate(t_center);
    CVector f(tg.size(), 0.0);

    if (mode == ReferenceMode::exact) {
        for (std::size_t j = 0; j < fg.size(); ++j) {
            const double a = std::max(fg.w(j) - 0.5 * fg.dw, lo);
            const double b = std::min(fg.w(j) + 0.5 * fg.dw, hi);
            if (b <= a || signal.amplitudes[j] == 0.0) continue;
            const double mid = 0.5 * (a + b);
            const double len = b - a;
            const cplx s = signal.amplitudes[j] * (len * kInvSqrt2Pi);
            for (std::size_t k = 0; k < tg.size(); ++k) {
                const double t = tg.t(k);
                f[k] += s * sinc(0.5 * len * t) * std::polar(1.0, mid * t);
            }
        }
    } else {
        const cplx s0 = signal.amplitudes[fg.axis().nearest(filter.center)] * (filter.delta_w * kInvSqrt2Pi);
        for (std::size_t k = 0; k < tg.size(); ++k) {
            const double t = tg.t(k);
            f[k] = s0 * sinc(0.5 * filter.delta_w * t) * std::polar(1.0, filter.center * t);
        }
    }

    double peak_s = 0.0;
    for (const auto& v : signal.amplitudes) peak_s = std::max(peak_s, std::abs(v));
    double peak_f = 0.0;
    for (const auto& v : f) peak_f = std::max(peak_f, std::abs(v));
    const double expected = peak_s * filter.delta_w * kInvSqrt2Pi;
    const double strength = expected > 0.0 ? peak_f / expected : 0.0;
    return {tg, std::move(f), strength, strength < kLowReferenceRatio};
}

/// Probability density over delay t for one polarization setting.
struct ProjectionDistribution {
    TimeGrid grid;
    Polarization pol = Polarization::D;
    RVector values;
};

using ProjectionSet = std::array<ProjectionDistribution, 4>;

inline double integral(const ProjectionDistribution& p)
{
    double s = 0.0;
    for (double v : p.values) s += v;
    return s * p.grid.dt;
}

namespace detail {

inline void check_same_grid(const TimeGrid& a, const TimeGrid& b, const char* what)
{
    if (!a.axis().same_as(b.axis())) throw DataError(std::string(what) + ": grids differ");
}

/// <Psi_1|Psi_1> = (||f||^2 + ||psi||^2) / 2.
inline double joint_norm(const TemporalEnvelope& signal, const ReferenceEnvelope& ref)
{
    return 0.5 * (signal.norm_squared() + norm_squared(ref.amplitudes, ref.grid.dt));
}

}  // namespace detail

/// P(t, phi) = |<t|<phi|Psi_1>|^2 / <Psi_1|Psi_1>, where the H branch carries the
/// reference and the V branch the signal.
inline ProjectionDistribution projection_probabilities(const TemporalEnvelope& signal, const ReferenceEnvelope& ref,
                                                       Polarization pol)
{
    detail::check_same_grid(signal.grid, ref.grid, "projection_probabilities");
    check_shape(signal.grid.size(), signal.amplitudes.size(), "projection_probabilities");
    check_shape(ref.grid.size(), ref.amplitudes.size(), "projection_probabilities");
    const double norm = detail::joint_norm(signal, ref);
    if (!(norm > 0.0)) throw DataError("projection_probabilities: state has zero norm");

    const cplx ch = h_projection(pol) / std::sqrt(2.0);
    const cplx cv = v_projection(pol) / std::sqrt(2.0);
    RVector values(signal.grid.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        values[k] = std::norm(ch * ref.amplitudes[k] + cv * signal.amplitudes[k]) / norm;
    }
    return {signal.grid, pol, std::move(values)};
}

inline ProjectionSet projection_set(const TemporalEnvelope& signal, const ReferenceEnvelope& ref)
{
    ProjectionSet out;
    for (auto pol : kPolarizations) out[index_of(pol)] = projection_probabilities(signal, ref, pol);
    return out;
}

/// Tolerance below zero accepted as rounding before clamping.
inline constexpr double kNegativeProbabilityTolerance = 1e-14;

/// Discretized unit-area gaussian on circular distances, as weights summing to 1.
inline RVector gate_kernel(const TimeGrid& grid, const GateSpec& gate)
{
    gate.validate();
    const std::size_t n = grid.size();
    RVector g(n, 0.0);
    if (gate.shape == GateShape::delta) {
        g[0] = 1.0;
        return g;
    }
    const double sigma = gate.fwhm_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double d = static_cast<double>(k <= n / 2 ? k : n - k) * grid.dt;
        g[k] = std::exp(-0.5 * (d / sigma) * (d / sigma));
        sum += g[k];
    }
    for (auto& v : g) v /= sum;
    return g;
}

inline RVector gate_convolve_values(const TimeGrid& grid, std::span<const double> values, const GateSpec& gate)
{
    gate.validate();
    if (gate.shape == GateShape::delta) return RVector(values.begin(), values.end());
    if (!(gate.fwhm_ps < grid.span() / 4.0)) throw ConfigError("gate too wide for the time grid");
    RVector out = circular_convolve(values, gate_kernel(grid, gate));
    for (auto& v : out) {
        if (v < -kNegativeProbabilityTolerance) throw DataError("gate convolution produced a negative probability");
        if (v < 0.0) v = 0.0;
    }
    return out;
}

/// P'(t) = ∫ g_t(t') P(t') dt' with a unit-area gate; a delta gate is the identity.
inline ProjectionDistribution gate_convolve(const ProjectionDistribution& p, const GateSpec& g)
{
    check_shape(p.grid.size(), p.values.size(), "gate_convolve");
    return {p.grid, p.pol, gate_convolve_values(p.grid, p.values, g)};
}

/// Evenly spaced delay points drawn from the simulation grid.
struct DelayScan {
    std::size_t points = 585;
    double step_ps = 0.02;
    double center_ps = 0.0;

    TimeGrid grid() const { return TimeGrid(points, step_ps, center_ps); }
};

inline ProjectionDistribution restrict_to_scan(const ProjectionDistribution& p, const DelayScan& scan)
{
    const TimeGrid sg = scan.grid();
    RVector values(sg.size());
    const UniformAxis full = p.grid.axis();
    for (std::size_t i = 0; i < sg.size(); ++i) {
        const double t = sg.t(i);
        const std::size_t k = full.nearest(t);
        if (std::abs(full.at(k) - t) > 1e-6 * p.grid.dt) {
            throw ConfigError("delay scan point does not coincide with a simulation sample (step must be a multiple of dt)");
        }
        values[i] = p.values[k];
    }
    return {sg, p.pol, std::move(values)};
}

/// Photon counts per delay point for one polarization setting.
struct CountRecord {
    TimeGrid grid;
    Polarization pol = Polarization::D;
    std::vector<std::int64_t> counts;
    std::int64_t exposure_pulses = 0;
    double mean_photons_per_pulse = 0.0;
    double detection_efficiency = 1.0;
    std::uint64_t seed = 0;

    /// Expected counts per unit probability density.
    double rate_scale() const
    {
        return static_cast<double>(exposure_pulses) * mean_photons_per_pulse * detection_efficiency * grid.dt;
    }

    bool operator==(const CountRecord&) const = default;
};

using CountSet = std::array<CountRecord, 4>;

inline std::int64_t draw_poisson(double lambda, KeyedStream& stream)
{
    if (!(lambda > 0.0)) return 0;
    std::poisson_distribution<std::int64_t> dist(lambda);
    return dist(stream);
}

/// counts[j] ~ Poisson(exposure * mean * efficiency * P(t_j) * dt), with one
/// keyed stream per (seed, j, polarization).
inline CountRecord sample_counts(const ProjectionDistribution& p, std::int64_t exposure_pulses,
                                 double mean_photons_per_pulse, double efficiency, std::uint64_t seed)
{
    check_shape(p.grid.size(), p.values.size(), "sample_counts");
    if (exposure_pulses < 0) throw ConfigError("exposure must be non-negative");
    if (!(mean_photons_per_pulse >= 0.0) || !std::isfinite(mean_photons_per_pulse)) {
        throw ConfigError("mean photon number must be finite and non-negative");
    }
    if (!(efficiency > 0.0 && efficiency <= 1.0)) throw ConfigError("detection efficiency must be in (0, 1]");

    CountRecord rec{p.grid, p.pol, std::vector<std::int64_t>(p.values.size(), 0), exposure_pulses,
                    mean_photons_per_pulse, efficiency, seed};
    const double scale = rec.rate_scale();
    for (std::size_t j = 0; j < p.values.size(); ++j) {
        const double lambda = scale * p.values[j];
        if (!std::isfinite(lambda)) throw DataError("non-finite count rate");
        KeyedStream stream(seed, j, index_of(p.pol));
        rec.counts[j] = draw_poisson(lambda, stream);
    }
    return rec;
}

/// Photon numbers of `count` consecutive pulses with Poisson mean `mean`.
inline std::vector<std::int64_t> draw_photon_numbers(double mean, std::size_t count, std::uint64_t seed)
{
    std::vector<std::int64_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        KeyedStream stream(seed, i, 0xF0F0);
        out[i] = draw_poisson(mean, stream);
    }
    return out;
}

enum class NoiseMode { noiseless, cl, spl };

inline std::string to_string(NoiseMode m)
{
    switch (m) {
        case NoiseMode::noiseless: return "noiseless";
        case NoiseMode::cl: return "cl";
        case NoiseMode::spl: return "spl";
    }
    return "?";
}

inline NoiseMode parse_noise_mode(const std::string& s)
{
    if (s == "noiseless") return NoiseMode::noiseless;
    if (s == "cl") return NoiseMode::cl;
    if (s == "spl") return NoiseMode::spl;
    throw ConfigError("unknown noise mode '" + s + "' (expected noiseless, cl or spl)");
}

struct NoiseConfig {
    NoiseMode mode = NoiseMode::noiseless;
    std::int64_t exposure_pulses = 0;
    double mean_photons_per_pulse = 0.0;
    double efficiency = 1.0;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    StateSpec state;
    FilterSpec filter;
    GateSpec gate;
    ReferenceMode reference = ReferenceMode::exact;
    std::optional<DelayScan> scan = DelayScan{};
    NoiseConfig noise;
};

struct ExperimentResult {
    SpectralWavefunction spectrum;
    TemporalEnvelope envelope;
    ReferenceEnvelope reference;
    ProjectionSet full;  // gated, on the simulation grid
    ProjectionSet measured;  // restricted to the delay scan
    std::optional<CountSet> counts;  // SPL mode only
};

/// State preparation -> filter -> projections -> gate -> delay scan -> counts.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    ExperimentResult r;
    r.spectrum = prepare_spectrum(cfg.state);
    r.envelope = spectrum_to_temporal(r.spectrum);
    r.reference = filtered_reference(r.spectrum, cfg.filter, cfg.reference);
    const ProjectionSet ideal = projection_set(r.envelope, r.reference);
    for (auto pol : kPolarizations) {
        const auto i = index_of(pol);
        r.full[i] = gate_convolve(ideal[i], cfg.gate);
        r.measured[i] = cfg.scan ? restrict_to_scan(r.full[i], *cfg.scan) : r.full[i];
    }
    if (cfg.noise.mode == NoiseMode::spl) {
        CountSet counts;
        for (auto pol : kPolarizations) {
            const auto i = index_of(pol);
            counts[i] = sample_counts(r.measured[i], cfg.noise.exposure_pulses, cfg.noise.mean_photons_per_pulse,
                                      cfg.noise.efficiency, cfg.noise.seed);
        }
        r.counts = std::move(counts);
    }
    return r;
}

}  // namespace dmtw
