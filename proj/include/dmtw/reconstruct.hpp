#pragma once

// Direct reconstruction: at every delay t the four projection values alone give
//   Re[psi_env(t)] ∝ P(t,D) - P(t,A),   Im[psi_env(t)] ∝ P(t,R) - P(t,L),
// up to the sinc(dw t / 2) envelope of the finite-width reference.

#include <algorithm>

#include "dmtw/apparatus.hpp"

namespace dmtw {

enum class DataSource { probability, counts };

struct RawReconstruction {
    TimeGrid grid;
    RVector re;
    RVector im;
    RVector sigma_re;  // empty for probability input
    RVector sigma_im;
    DataSource source = DataSource::probability;
};

namespace detail {

template <class Set>
void check_set_layout(const Set& set, const char* what)
{
    for (auto pol : kPolarizations) {
        if (set[index_of(pol)].pol != pol) {
            throw DataError(std::string(what) + ": inputs must be ordered D, A, R, L");
        }
        check_same_grid(set[0].grid, set[index_of(pol)].grid, what);
    }
}

}  // namespace detail

inline RawReconstruction raw_reconstruct(const ProjectionSet& p)
{
    detail::check_set_layout(p, "raw_reconstruct");
    const std::size_t n = p[0].grid.size();
    for (const auto& d : p) check_shape(n, d.values.size(), "raw_reconstruct");
    RawReconstruction out{p[0].grid, RVector(n), RVector(n), {}, {}, DataSource::probability};
    for (std::size_t j = 0; j < n; ++j) {
        out.re[j] = p[0].values[j] - p[1].values[j];
        out.im[j] = p[2].values[j] - p[3].values[j];
    }
    return out;
}

/// Counts are converted to density estimates counts / (exposure * mean *
/// efficiency * dt); shot-noise errors follow from the pooled Poisson variances.
inline RawReconstruction raw_reconstruct(const CountSet& c)
{
    detail::check_set_layout(c, "raw_reconstruct");
    for (const auto& r : c) {
        if (r.exposure_pulses != c[0].exposure_pulses || r.mean_photons_per_pulse != c[0].mean_photons_per_pulse ||
            r.detection_efficiency != c[0].detection_efficiency) {
            throw DataError("raw_reconstruct: count records carry different exposure metadata");
        }
    }
    const double scale = c[0].rate_scale();
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DataError("raw_reconstruct: count records have zero exposure");
    const std::size_t n = c[0].grid.size();
    for (const auto& r : c) check_shape(n, r.counts.size(), "raw_reconstruct");

    RawReconstruction out{c[0].grid, RVector(n), RVector(n), RVector(n), RVector(n), DataSource::counts};
    for (std::size_t j = 0; j < n; ++j) {
        const auto d = static_cast<double>(c[0].counts[j]);
        const auto a = static_cast<double>(c[1].counts[j]);
        const auto r = static_cast<double>(c[2].counts[j]);
        const auto l = static_cast<double>(c[3].counts[j]);
        out.re[j] = (d - a) / scale;
        out.im[j] = (r - l) / scale;
        // E[D + A] = E[R + L], so all four channels estimate the variance of
        // either difference; the floor keeps empty bins from claiming zero error.
        const double var = std::max(0.5 * (d + a + r + l), 1.0);
        out.sigma_re[j] = std::sqrt(var) / scale;
        out.sigma_im[j] = out.sigma_re[j];
    }
    return out;
}

struct CorrectionMask {
    TimeGrid grid;
    RVector sinc_values;
    std::vector<bool> valid;
    double threshold = 0.05;

    std::size_t valid_count() const { return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true)); }
    double masked_fraction() const
    {
        return valid.empty() ? 0.0 : 1.0 - static_cast<double>(valid_count()) / static_cast<double>(valid.size());
    }
};

inline constexpr double kDefaultSincThreshold = 0.05;

inline CorrectionMask correction_mask(const TimeGrid& grid, const FilterSpec& f, double threshold)
{
    f.validate();
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("sinc threshold must lie in (0, 1)");
    CorrectionMask m{grid, RVector(grid.size()), std::vector<bool>(grid.size()), threshold};
    for (std::size_t j = 0; j < grid.size(); ++j) {
        m.sinc_values[j] = sinc(0.5 * f.delta_w * grid.t(j));
        m.valid[j] = std::abs(m.sinc_values[j]) >= threshold;
    }
    return m;
}

struct SincCorrected {
    TemporalEnvelope envelope;  // unnormalized, zero where invalid
    CorrectionMask mask;
    RVector sigma_re;
    RVector sigma_im;
};

/// Divides re + i im by sinc(dw t / 2) where |sinc| >= threshold and undoes the
/// carrier offset of an off-center filter. Invalid points are zeroed.
inline SincCorrected sinc_correction(const RawReconstruction& raw, const FilterSpec& f,
                                     double threshold = kDefaultSincThreshold)
{
    const std::size_t n = raw.grid.size();
    check_shape(n, raw.re.size(), "sinc_correction");
    check_shape(n, raw.im.size(), "sinc_correction");
    SincCorrected out{{raw.grid, CVector(n, 0.0)}, correction_mask(raw.grid, f, threshold), {}, {}};
    const bool with_sigma = !raw.sigma_re.empty();
    if (with_sigma) {
        out.sigma_re.assign(n, 0.0);
        out.sigma_im.assign(n, 0.0);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (!out.mask.valid[j]) continue;
        const double s = out.mask.sinc_values[j];
        out.envelope.amplitudes[j] = cplx(raw.re[j], raw.im[j]) / s * std::polar(1.0, f.center * raw.grid.t(j));
        if (with_sigma) {
            out.sigma_re[j] = raw.sigma_re[j] / std::abs(s);
            out.sigma_im[j] = raw.sigma_im[j] / std::abs(s);
        }
    }
    return out;
}

struct NormalizedEnvelope {
    TemporalEnvelope envelope;
    double norm_constant = 1.0;  // multiplier applied to the magnitudes
    double phase_rotation = 0.0;  // radians added to every sample
    std::size_t peak_index = 0;
};

/// Scales to unit norm over the valid samples and rotates the global phase so
/// the largest-magnitude valid sample is real and positive.
inline NormalizedEnvelope normalize_and_phase(const TemporalEnvelope& env, const CorrectionMask& mask)
{
    const std::size_t n = env.grid.size();
    check_shape(n, env.amplitudes.size(), "normalize_and_phase");
    check_shape(n, mask.valid.size(), "normalize_and_phase");
    double mass = 0.0;
    double peak = -1.0;
    std::size_t ipeak = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!mask.valid[j]) continue;
        const double a2 = std::norm(env.amplitudes[j]);
        mass += a2;
        if (a2 > peak) {
            peak = a2;
            ipeak = j;
        }
    }
    mass *= env.grid.dt;
    if (!(mass > 0.0) || !std::isfinite(mass)) throw DataError("reconstruction has zero mass inside the valid mask");

    NormalizedEnvelope out;
    out.norm_constant = 1.0 / std::sqrt(mass);
    out.phase_rotation = -std::arg(env.amplitudes[ipeak]);
    out.peak_index = ipeak;
    const cplx factor = std::polar(out.norm_constant, out.phase_rotation);
    out.envelope = {env.grid, CVector(n, 0.0)};
    for (std::size_t j = 0; j < n; ++j) {
        if (mask.valid[j]) out.envelope.amplitudes[j] = env.amplitudes[j] * factor;
    }
    out.envelope.amplitudes[ipeak] = std::abs(out.envelope.amplitudes[ipeak]);
    return out;
}

struct ReconstructedSpectrum {
    SpectralWavefunction spectrum;
    TimeGrid padded_grid;
    double zero_filled_fraction = 0.0;  // share of transform input samples set to zero
};

/// Zero-fills the masked samples, embeds the envelope in a power-of-two grid of
/// the same step (at least `min_samples` long) and transforms.
inline ReconstructedSpectrum reconstruction_to_spectrum(const TemporalEnvelope& env, const CorrectionMask& mask,
                                                       std::size_t min_samples = 0)
{
    const std::size_t n = env.grid.size();
    check_shape(n, env.amplitudes.size(), "reconstruction_to_spectrum");
    check_shape(n, mask.valid.size(), "reconstruction_to_spectrum");
    const std::size_t m = next_power_of_two(std::max({n, min_samples, std::size_t{4}}));
    const TimeGrid padded(m, env.grid.dt, env.grid.t_center);
    const std::size_t offset = m / 2 - n / 2;

    TemporalEnvelope embedded{padded, CVector(m, 0.0)};
    std::size_t kept = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!mask.valid[j]) continue;
        embedded.amplitudes[offset + j] = env.amplitudes[j];
        ++kept;
    }
    ReconstructedSpectrum out;
    out.spectrum = temporal_to_spectrum(embedded);
    out.padded_grid = padded;
    out.zero_filled_fraction = 1.0 - static_cast<double>(kept) / static_cast<double>(m);
    return out;
}

/// Everything the reconstruction pipeline produces for one data set.
struct Reconstruction {
    RawReconstruction raw;
    CorrectionMask mask;
    TemporalEnvelope envelope;  // normalized, phase fixed
    RVector sigma_re;  // in normalized units, empty for probability input
    RVector sigma_im;
    double norm_constant = 1.0;
    double phase_rotation = 0.0;
};

inline Reconstruction reconstruct(RawReconstruction raw, const FilterSpec& f,
                                  double threshold = kDefaultSincThreshold)
{
    SincCorrected corrected = sinc_correction(raw, f, threshold);
    NormalizedEnvelope norm = normalize_and_phase(corrected.envelope, corrected.mask);
    Reconstruction out{std::move(raw), std::move(corrected.mask), std::move(norm.envelope), {}, {},
                       norm.norm_constant, norm.phase_rotation};
    if (!corrected.sigma_re.empty()) {
        const double c = std::cos(norm.phase_rotation);
        const double s = std::sin(norm.phase_rotation);
        const std::size_t n = corrected.sigma_re.size();
        out.sigma_re.resize(n);
        out.sigma_im.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const double sr = corrected.sigma_re[j];
            const double si = corrected.sigma_im[j];
            out.sigma_re[j] = norm.norm_constant * std::hypot(c * sr, s * si);
            out.sigma_im[j] = norm.norm_constant * std::hypot(s * sr, c * si);
        }
    }
    return out;
}

inline Reconstruction reconstruct(const ProjectionSet& p, const FilterSpec& f,
                                  double threshold = kDefaultSincThreshold)
{
    return reconstruct(raw_reconstruct(p), f, threshold);
}

inline Reconstruction reconstruct(const CountSet& c, const FilterSpec& f, double threshold = kDefaultSincThreshold)
{
    return reconstruct(raw_reconstruct(c), f, threshold);
}

}  // namespace dmtw
