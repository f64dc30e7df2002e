// Brute-force evaluation of P(t, phi) straight from the state
//   |Psi_1> = (|H>|f> + |V>|psi>) / sqrt(2),  <w|f> = rect((w - c)/dw) <w|psi>,
// by direct O(n^2) sums, Gauss-Legendre cell integrals and explicit
// polarization vectors, compared with the FFT pipeline.

#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include "dmtw/dmtw.hpp"

namespace dmtw::oracle {

using Gauss = boost::math::quadrature::gauss<double, 20>;

/// (H, V) components of the analyzer states.
inline std::array<cplx, 2> analyzer(Polarization p)
{
    const double r = 1.0 / std::sqrt(2.0);
    switch (p) {
        case Polarization::D: return {cplx(r), cplx(r)};
        case Polarization::A: return {cplx(r), cplx(-r)};
        case Polarization::R: return {cplx(r), cplx(0, r)};
        case Polarization::L: return {cplx(r), cplx(0, -r)};
    }
    return {};
}

/// (2 pi)^{-1/2} ∫_a^b e^{i w t} dw by quadrature.
inline cplx cell_integral(double a, double b, double t)
{
    const double re = Gauss::integrate([t](double w) { return std::cos(w * t); }, a, b);
    const double im = Gauss::integrate([t](double w) { return std::sin(w * t); }, a, b);
    return cplx(re, im) * kInvSqrt2Pi;
}

inline ProjectionSet evaluate(const SpectralWavefunction& s, const FilterSpec& filter, const GateSpec& gate)
{
    const FreqGrid& fg = s.grid;
    const TimeGrid tg = fg.conjugate();
    const std::size_t n = fg.size();
    CVector psi(n, 0.0), f(n, 0.0);
    const double lo = filter.center - 0.5 * filter.delta_w;
    const double hi = filter.center + 0.5 * filter.delta_w;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = tg.t(k);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = fg.w(j);
            psi[k] += s.amplitudes[j] * std::polar(1.0, w * t) * fg.dw * kInvSqrt2Pi;
            const double a = std::max(w - 0.5 * fg.dw, lo);
            const double b = std::min(w + 0.5 * fg.dw, hi);
            if (b > a) f[k] += s.amplitudes[j] * cell_integral(a, b, t);
        }
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += 0.5 * (std::norm(f[k]) + std::norm(psi[k])) * tg.dt;

    RVector weights(n, 0.0);
    if (gate.shape == GateShape::delta) {
        weights[0] = 1.0;
    } else {
        const double sigma = gate.fwhm_ps / std::sqrt(8.0 * std::log(2.0));
        double sum = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double d = tg.dt * static_cast<double>(std::min(m, n - m));
            weights[m] = std::exp(-d * d / (2 * sigma * sigma));
            sum += weights[m];
        }
        for (auto& w : weights) w /= sum;
    }

    ProjectionSet out;
    for (auto pol : kPolarizations) {
        const auto phi = analyzer(pol);
        RVector p(n);
        for (std::size_t k = 0; k < n; ++k) {
            const cplx amp = (std::conj(phi[0]) * f[k] + std::conj(phi[1]) * psi[k]) / std::sqrt(2.0);
            p[k] = std::norm(amp) / norm;
        }
        RVector g(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t m = 0; m < n; ++m) g[k] += weights[m] * p[(k + n - m) % n];
        }
        out[index_of(pol)] = {tg, pol, std::move(g)};
    }
    return out;
}

/// Largest |a - b| over all four channels relative to each channel's peak.
inline double max_relative_error(const ProjectionSet& a, const ProjectionSet& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double peak = 0.0;
        double err = 0.0;
        for (std::size_t k = 0; k < b[i].values.size(); ++k) {
            peak = std::max(peak, std::abs(b[i].values[k]));
            err = std::max(err, std::abs(a[i].values[k] - b[i].values[k]));
        }
        worst = std::max(worst, err / peak);
    }
    return worst;
}

/// Runs the pipeline on an n = 256 grid and returns its error against the oracle.
inline double pipeline_error(Preparation prep, GateShape shape)
{
    ExperimentConfig cfg;
    cfg.state.prep = prep;
    cfg.state.n = 256;
    cfg.state.dt_ps = 0.08;
    cfg.gate.shape = shape;
    cfg.gate.fwhm_ps = 0.3;
    cfg.scan.reset();
    const auto run = run_experiment(cfg);
    return max_relative_error(run.full, evaluate(run.spectrum, cfg.filter, cfg.gate));
}

}  // namespace dmtw::oracle
