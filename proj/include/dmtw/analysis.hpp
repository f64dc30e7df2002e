#pragma once

// Quantitative evaluation of reconstructed envelopes: sinc-width and
// phase-gradient fits, the Bhattacharyya fidelity between intensity
// distributions, and the window-to-resolution dynamic range.

#include <gsl/gsl_errno.h>
#include <gsl/gsl_fit.h>
#include <gsl/gsl_linalg.h>
#include <gsl/gsl_multimin.h>

#include <limits>
#include <map>
#include <optional>
#include <utility>

#include "dmtw/apparatus.hpp"

namespace dmtw {

enum class FitModel { sinc_magnitude, linear_phase };

inline std::string to_string(FitModel m)
{
    return m == FitModel::sinc_magnitude ? "sinc_magnitude" : "linear_phase";
}

struct FitReport {
    FitModel model = FitModel::sinc_magnitude;
    std::map<std::string, double> params;  // A, t_c, delta_t  |  kappa, intercept
    std::map<std::string, double> param_stderr;
    std::pair<double, double> window{0.0, 0.0};  // ps
    double residual_rms = 0.0;
    bool converged = false;
    std::size_t points = 0;
};

/// A |sinc(2 pi (t - t_c) / delta_t)|: central zeros at t_c ± delta_t / 2.
inline double sinc_magnitude_model(double amplitude, double t_c, double delta_t, double t)
{
    return amplitude * std::abs(sinc(kTwoPi * (t - t_c) / delta_t));
}

/// |sinc| falls to one half at x = 1.8954942670; FWHM = 2 x / (2 pi) * delta_t.
inline constexpr double kSincFwhmPerWidth = 2.0 * 1.8954942670339809 / (2.0 * std::numbers::pi);

struct SincFitOptions {
    std::optional<double> initial_width;  // ps
    std::vector<bool> mask;  // empty: use every sample
    std::size_t coarse_points = 50;
    double coarse_span = 0.5;  // ± fraction of the initial width
    double tolerance = 1e-12;  // simplex size, relative units
    std::size_t max_iterations = 20000;
};

namespace detail {

struct SincFitProblem {
    RVector t;
    RVector y;
    double a0 = 1.0;
    double tc0 = 0.0;
    double w0 = 1.0;

    // Parameters are scaled: A = a0 x0, t_c = tc0 + w0 x1, delta_t = w0 x2.
    double sse(double x0, double x1, double x2) const
    {
        const double a = a0 * x0;
        const double tc = tc0 + w0 * x1;
        const double w = w0 * x2;
        if (!(w > 0.0)) return std::numeric_limits<double>::infinity();
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double r = y[i] - sinc_magnitude_model(a, tc, w, t[i]);
            s += r * r;
        }
        return s;
    }
};

inline double sinc_fit_objective(const gsl_vector* x, void* params)
{
    const auto* p = static_cast<const SincFitProblem*>(params);
    return p->sse(gsl_vector_get(x, 0), gsl_vector_get(x, 1), gsl_vector_get(x, 2));
}

/// Runs nmsimplex2 from `x`; returns true on convergence. `x` holds the result.
inline bool run_simplex(SincFitProblem& prob, std::array<double, 3>& x, double tol, std::size_t max_iter)
{
    gsl_multimin_function fn{&sinc_fit_objective, 3, &prob};
    gsl_vector* start = gsl_vector_alloc(3);
    gsl_vector* step = gsl_vector_alloc(3);
    for (std::size_t i = 0; i < 3; ++i) gsl_vector_set(start, i, x[i]);
    gsl_vector_set(step, 0, 0.05);
    gsl_vector_set(step, 1, 0.02);
    gsl_vector_set(step, 2, 0.02);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 3);
    gsl_multimin_fminimizer_set(s, &fn, start, step);

    bool converged = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), tol) == GSL_SUCCESS) {
            converged = true;
            break;
        }
    }
    for (std::size_t i = 0; i < 3; ++i) x[i] = gsl_vector_get(s->x, i);
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(start);
    return converged;
}

/// Returns sqrt(diag(s^2 (J^T J)^{-1})) for a residual Jacobian J (m x p).
inline std::vector<double> least_squares_stderr(const std::vector<std::array<double, 3>>& jac, double rss)
{
    const std::size_t m = jac.size();
    std::vector<double> out(3, std::numeric_limits<double>::quiet_NaN());
    if (m <= 3) return out;
    gsl_matrix* jtj = gsl_matrix_calloc(3, 3);
    for (const auto& row : jac) {
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) {
                *gsl_matrix_ptr(jtj, a, b) += row[a] * row[b];
            }
        }
    }
    gsl_permutation* perm = gsl_permutation_alloc(3);
    gsl_matrix* inv = gsl_matrix_alloc(3, 3);
    int signum = 0;
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    if (gsl_linalg_LU_decomp(jtj, perm, &signum) == GSL_SUCCESS && gsl_linalg_LU_det(jtj, signum) != 0.0 &&
        gsl_linalg_LU_invert(jtj, perm, inv) == GSL_SUCCESS) {
        const double s2 = rss / static_cast<double>(m - 3);
        for (std::size_t a = 0; a < 3; ++a) out[a] = std::sqrt(std::max(0.0, s2 * gsl_matrix_get(inv, a, a)));
    }
    gsl_set_error_handler(old);
    gsl_matrix_free(inv);
    gsl_permutation_free(perm);
    gsl_matrix_free(jtj);
    return out;
}

}  // namespace detail

/// Half-maximum width of the dominant peak, linearly interpolated.
inline double half_max_width(std::span<const double> t, std::span<const double> y)
{
    const auto it = std::max_element(y.begin(), y.end());
    const std::size_t ip = static_cast<std::size_t>(it - y.begin());
    const double half = 0.5 * *it;
    auto crossing = [&](std::size_t from, int dir) {
        std::size_t k = from;
        while (true) {
            const bool at_end = dir < 0 ? k == 0 : k + 1 == y.size();
            if (at_end) return t[k];
            const std::size_t next = dir < 0 ? k - 1 : k + 1;
            if (y[next] < half) {
                const double f = (y[k] - half) / (y[k] - y[next]);
                return t[k] + f * (t[next] - t[k]);
            }
            k = next;
        }
    };
    return crossing(ip, +1) - crossing(ip, -1);
}

/// Least-squares fit of A |sinc(2 pi (t - t_c) / delta_t)| to a magnitude
/// profile: coarse scan over delta_t, then Nelder-Mead refinement.
inline FitReport fit_sinc_width(const TimeGrid& grid, std::span<const double> magnitude,
                                const SincFitOptions& opt = {})
{
    check_shape(grid.size(), magnitude.size(), "fit_sinc_width");
    if (!opt.mask.empty()) check_shape(grid.size(), opt.mask.size(), "fit_sinc_width mask");

    detail::SincFitProblem prob;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!opt.mask.empty() && !opt.mask[i]) continue;
        if (!std::isfinite(magnitude[i])) throw DataError("fit_sinc_width: non-finite magnitude");
        prob.t.push_back(grid.t(i));
        prob.y.push_back(magnitude[i]);
    }
    if (prob.t.size() < 4) throw DataError("fit_sinc_width: fewer than 4 samples");
    const auto [ymin, ymax] = std::minmax_element(prob.y.begin(), prob.y.end());
    if (!(*ymax > 0.0) || (*ymax - *ymin) <= 1e-12 * *ymax) throw DataError("fit_sinc_width: degenerate (flat) input");

    const std::size_t ipeak = static_cast<std::size_t>(ymax - prob.y.begin());
    const double w_init = opt.initial_width.value_or(half_max_width(prob.t, prob.y) / kSincFwhmPerWidth);
    if (!(w_init > 0.0)) throw DataError("fit_sinc_width: cannot derive an initial width");

    prob.tc0 = prob.t[ipeak];
    prob.w0 = w_init;
    prob.a0 = *ymax;

    // Coarse scan with t_c at the peak and A solved in closed form.
    double best_sse = std::numeric_limits<double>::infinity();
    std::array<double, 3> x{1.0, 0.0, 1.0};
    const std::size_t nc = std::max<std::size_t>(opt.coarse_points, 2);
    for (std::size_t c = 0; c < nc; ++c) {
        const double frac = 1.0 - opt.coarse_span + 2.0 * opt.coarse_span * static_cast<double>(c) /
                                                          static_cast<double>(nc - 1);
        const double w = w_init * frac;
        double sy = 0.0;
        double ss = 0.0;
        for (std::size_t i = 0; i < prob.t.size(); ++i) {
            const double s = sinc_magnitude_model(1.0, prob.tc0, w, prob.t[i]);
            sy += s * prob.y[i];
            ss += s * s;
        }
        if (ss <= 0.0) continue;
        const double a = sy / ss;
        const double e = prob.sse(a / prob.a0, 0.0, frac);
        if (e < best_sse) {
            best_sse = e;
            x = {a / prob.a0, 0.0, frac};
        }
    }

    bool converged = detail::run_simplex(prob, x, opt.tolerance, opt.max_iterations);
    // A restart guards against a collapsed simplex.
    converged = detail::run_simplex(prob, x, opt.tolerance, opt.max_iterations) && converged;

    FitReport rep;
    rep.model = FitModel::sinc_magnitude;
    const double a = prob.a0 * x[0];
    const double tc = prob.tc0 + prob.w0 * x[1];
    const double w = prob.w0 * x[2];
    rep.params = {{"A", a}, {"t_c", tc}, {"delta_t", w}};
    rep.window = {prob.t.front(), prob.t.back()};
    rep.points = prob.t.size();
    const double rss = prob.sse(x[0], x[1], x[2]);
    rep.residual_rms = std::sqrt(rss / static_cast<double>(prob.t.size()));
    rep.converged = converged && std::isfinite(rep.residual_rms) && w > 0.0;

    std::vector<std::array<double, 3>> jac(prob.t.size());
    const std::array<double, 3> h{1e-6 * std::max(std::abs(a), 1e-300), 1e-6 * w, 1e-6 * w};
    for (std::size_t i = 0; i < prob.t.size(); ++i) {
        const double ti = prob.t[i];
        jac[i][0] = (sinc_magnitude_model(a + h[0], tc, w, ti) - sinc_magnitude_model(a - h[0], tc, w, ti)) / (2 * h[0]);
        jac[i][1] = (sinc_magnitude_model(a, tc + h[1], w, ti) - sinc_magnitude_model(a, tc - h[1], w, ti)) / (2 * h[1]);
        jac[i][2] = (sinc_magnitude_model(a, tc, w + h[2], ti) - sinc_magnitude_model(a, tc, w - h[2], ti)) / (2 * h[2]);
    }
    const auto se = detail::least_squares_stderr(jac, rss);
    rep.param_stderr = {{"A", se[0]}, {"t_c", se[1]}, {"delta_t", se[2]}};
    return rep;
}

/// Wraps an angle difference into (-pi, pi].
inline double wrap_to_pi(double d)
{
    return canonical_phase(d);
}

/// Sequential unwrapping: each successive difference is taken on (-pi, pi].
inline RVector unwrap_phase(std::span<const double> wrapped)
{
    RVector out(wrapped.begin(), wrapped.end());
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = out[i - 1] + wrap_to_pi(wrapped[i] - wrapped[i - 1]);
    return out;
}

inline constexpr double kPhaseMagnitudeFloor = 0.1;

/// Weighted (|psi|^2) linear fit to the unwrapped phase inside [t_min, t_max],
/// using only samples above `floor` times the envelope's peak magnitude.
inline FitReport fit_phase_gradient(const TemporalEnvelope& env, std::pair<double, double> window,
                                    double floor = kPhaseMagnitudeFloor)
{
    check_shape(env.grid.size(), env.amplitudes.size(), "fit_phase_gradient");
    const auto [t_min, t_max] = window;
    const double half = 0.5 * env.grid.dt;
    if (!(t_min < t_max) || t_min < env.grid.t(0) - half || t_max > env.grid.t(env.grid.size() - 1) + half) {
        throw ConfigError("phase-fit window must be ordered and inside the time grid");
    }
    double peak = 0.0;
    for (const auto& v : env.amplitudes) peak = std::max(peak, std::abs(v));

    RVector t, phase, weight;
    for (std::size_t i = 0; i < env.grid.size(); ++i) {
        const double ti = env.grid.t(i);
        const double mag = std::abs(env.amplitudes[i]);
        if (ti < t_min || ti > t_max || !(mag >= floor * peak) || mag == 0.0) continue;
        t.push_back(ti);
        phase.push_back(std::arg(env.amplitudes[i]));
        weight.push_back(mag * mag);
    }
    if (t.size() < 4) throw DataError("fit_phase_gradient: fewer than 4 usable samples in the window");
    const RVector unwrapped = unwrap_phase(phase);

    double c0 = 0, c1 = 0, cov00 = 0, cov01 = 0, cov11 = 0, chisq = 0;
    gsl_fit_wlinear(t.data(), 1, weight.data(), 1, unwrapped.data(), 1, t.size(), &c0, &c1, &cov00, &cov01, &cov11,
                    &chisq);
    double wsum = 0.0;
    for (double w : weight) wsum += w;
    const double dof = static_cast<double>(t.size() - 2);

    FitReport rep;
    rep.model = FitModel::linear_phase;
    rep.params = {{"kappa", c1}, {"intercept", c0}};
    rep.param_stderr = {{"kappa", std::sqrt(cov11 * chisq / dof)}, {"intercept", std::sqrt(cov00 * chisq / dof)}};
    rep.window = {t_min, t_max};
    rep.points = t.size();
    rep.residual_rms = std::sqrt(chisq / wsum);
    rep.converged = std::isfinite(c1) && std::isfinite(rep.residual_rms);
    return rep;
}

struct LinearLaw {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double intercept_stderr = 0.0;
};

/// Ordinary least-squares line y = intercept + slope x.
inline LinearLaw fit_linear_law(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) throw DataError("fit_linear_law needs >= 2 paired samples");
    double c0 = 0, c1 = 0, cov00 = 0, cov01 = 0, cov11 = 0, sumsq = 0;
    gsl_fit_linear(x.data(), 1, y.data(), 1, x.size(), &c0, &c1, &cov00, &cov01, &cov11, &sumsq);
    return {c1, c0, std::sqrt(cov11), std::sqrt(cov00)};
}

/// Subtracts the s = 0 offset (kappa_0) from a sweep of fitted gradients.
inline RVector remove_offset_at_zero(std::span<const double> s, std::span<const double> kappa)
{
    if (s.size() != kappa.size()) throw DataError("remove_offset_at_zero: size mismatch");
    const auto it = std::find(s.begin(), s.end(), 0.0);
    if (it == s.end()) throw DataError("remove_offset_at_zero: sweep has no s = 0 point");
    const double k0 = kappa[static_cast<std::size_t>(it - s.begin())];
    RVector out(kappa.begin(), kappa.end());
    for (auto& v : out) v -= k0;
    return out;
}

enum class FidelityDomain { time, frequency };

inline std::string to_string(FidelityDomain d) { return d == FidelityDomain::time ? "time" : "frequency"; }

struct FidelityReport {
    double value = 0.0;
    FidelityDomain domain = FidelityDomain::time;
    std::size_t bin_count = 0;
    std::size_t clamped = 0;  // negative inputs set to zero
};

/// Bhattacharyya coefficient sum_j sqrt(p_j q_j) after clamping negatives and
/// renormalizing both inputs to unit sum.
inline FidelityReport classical_fidelity(std::span<const double> p, std::span<const double> q,
                                         FidelityDomain domain = FidelityDomain::time)
{
    if (p.size() != q.size()) throw DataError("classical_fidelity: inputs differ in length");
    FidelityReport rep{0.0, domain, p.size(), 0};
    double sp = 0.0;
    double sq = 0.0;
    auto clamp = [&](double v) {
        if (v < 0.0 || !std::isfinite(v)) {
            ++rep.clamped;
            return 0.0;
        }
        return v;
    };
    RVector pc(p.size()), qc(q.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        pc[i] = clamp(p[i]);
        qc[i] = clamp(q[i]);
        sp += pc[i];
        sq += qc[i];
    }
    if (!(sp > 0.0) || !(sq > 0.0)) throw DataError("classical_fidelity: all-zero input");
    double f = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) f += std::sqrt(pc[i] * qc[i]);
    rep.value = std::clamp(f / std::sqrt(sp * sq), 0.0, 1.0);
    return rep;
}

/// Redistributes per-bin masses from `src` cells onto `dst` cells in
/// proportion to overlap. Mass outside the destination axis is dropped.
inline RVector rebin_mass(const UniformAxis& src, std::span<const double> mass, const UniformAxis& dst)
{
    if (src.n != mass.size()) throw DataError("rebin_mass: size mismatch");
    RVector out(dst.n, 0.0);
    for (std::size_t i = 0; i < src.n; ++i) {
        if (mass[i] == 0.0) continue;
        const double lo = src.at(i) - 0.5 * src.step;
        const double hi = src.at(i) + 0.5 * src.step;
        const double first = std::floor((lo - dst.lower_edge()) / dst.step);
        const double last = std::floor((hi - dst.lower_edge()) / dst.step);
        for (double kd = std::max(first, 0.0); kd <= std::min(last, static_cast<double>(dst.n - 1)); kd += 1.0) {
            const auto k = static_cast<std::size_t>(kd);
            const double a = std::max(lo, dst.at(k) - 0.5 * dst.step);
            const double b = std::min(hi, dst.at(k) + 0.5 * dst.step);
            if (b > a) out[k] += mass[i] * (b - a) / src.step;
        }
    }
    return out;
}

/// Fidelity between two densities sampled on different uniform axes; both are
/// rebinned (mass-conserving) onto the coarser axis first.
inline FidelityReport classical_fidelity(const UniformAxis& ap, std::span<const double> p_density,
                                         const UniformAxis& aq, std::span<const double> q_density,
                                         FidelityDomain domain)
{
    if (ap.n != p_density.size() || aq.n != q_density.size()) throw DataError("classical_fidelity: size mismatch");
    const UniformAxis& coarse = ap.step >= aq.step ? ap : aq;
    auto to_mass = [](const UniformAxis& a, std::span<const double> d) {
        RVector m(d.begin(), d.end());
        for (auto& v : m) v = std::max(v, 0.0) * a.step;
        return m;
    };
    const RVector pm = ap.same_as(coarse) ? to_mass(ap, p_density) : rebin_mass(ap, to_mass(ap, p_density), coarse);
    const RVector qm = aq.same_as(coarse) ? to_mass(aq, q_density) : rebin_mass(aq, to_mass(aq, q_density), coarse);
    return classical_fidelity(pm, qm, domain);
}

/// Intensity density on a uniform axis, optionally with a validity mask.
struct SampledIntensity {
    UniformAxis axis;
    RVector density;
    std::vector<bool> valid;  // empty: all valid
};

inline SampledIntensity intensity_of(const TemporalEnvelope& e, std::vector<bool> valid = {})
{
    RVector d(e.amplitudes.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::norm(e.amplitudes[i]);
    return {e.grid.axis(), std::move(d), std::move(valid)};
}

inline SampledIntensity intensity_of(const SpectralWavefunction& s)
{
    RVector d(s.amplitudes.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::norm(s.amplitudes[i]);
    return {s.grid.axis(), std::move(d), {}};
}

/// Fidelity after rebinning both inputs onto the coarser axis. A coarse bin
/// is dropped from both when either input marks its nearest sample invalid.
inline FidelityReport intensity_fidelity(const SampledIntensity& a, const SampledIntensity& b, FidelityDomain domain)
{
    for (const auto* x : {&a, &b}) {
        if (x->axis.n != x->density.size()) throw DataError("intensity_fidelity: size mismatch");
        if (!x->valid.empty() && x->valid.size() != x->density.size()) {
            throw DataError("intensity_fidelity: mask size mismatch");
        }
    }
    const UniformAxis coarse = a.axis.step >= b.axis.step ? a.axis : b.axis;
    auto to_coarse = [&](const SampledIntensity& x) {
        RVector m(x.density.begin(), x.density.end());
        for (auto& v : m) v = std::max(v, 0.0) * x.axis.step;
        return x.axis.same_as(coarse) ? m : rebin_mass(x.axis, m, coarse);
    };
    RVector pm = to_coarse(a);
    RVector qm = to_coarse(b);
    for (std::size_t k = 0; k < coarse.n; ++k) {
        bool keep = true;
        for (const auto* x : {&a, &b}) {
            if (x->valid.empty()) continue;
            const double t = coarse.at(k);
            keep = keep && t >= x->axis.lower_edge() && t <= x->axis.upper_edge() && x->valid[x->axis.nearest(t)];
        }
        if (!keep) pm[k] = qm[k] = 0.0;
    }
    return classical_fidelity(pm, qm, domain);
}

/// Spectral phase jump across `boundary`: weighted circular means of the phase
/// on either side (samples above `floor` of the peak magnitude, at least
/// `margin` away from the boundary and inside [lo, hi]), differenced.
inline double phase_step_estimate(const SpectralWavefunction& s, double boundary, double margin, double lo, double hi,
                                  double floor = kPhaseMagnitudeFloor)
{
    double peak = 0.0;
    for (const auto& v : s.amplitudes) peak = std::max(peak, std::abs(v));
    cplx below = 0.0, above = 0.0;
    for (std::size_t j = 0; j < s.grid.size(); ++j) {
        const double w = s.grid.w(j);
        const cplx a = s.amplitudes[j];
        if (w < lo || w > hi || std::abs(w - boundary) < margin || std::abs(a) < floor * peak) continue;
        (w < boundary ? below : above) += a * std::abs(a);
    }
    if (below == 0.0 || above == 0.0) throw DataError("phase_step_estimate: no samples on one side of the boundary");
    return canonical_phase(std::arg(above) - std::arg(below));
}

/// Measurable window (central-zero spacing of the reference sinc, 4 pi / dw)
/// over the gate FWHM.
inline double dynamic_range(const FilterSpec& f, const GateSpec& g)
{
    f.validate();
    g.validate();
    if (g.shape == GateShape::delta) throw ConfigError("dynamic range is undefined for a delta gate");
    return (2.0 * kTwoPi / f.delta_w) / g.fwhm_ps;
}

}  // namespace dmtw
