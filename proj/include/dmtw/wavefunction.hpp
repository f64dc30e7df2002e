#pragma once

#include <algorithm>
#include <cmath>

#include "dmtw/grid.hpp"

namespace dmtw {

/// Complex spectral amplitude psi~_env(w), w relative to the carrier.
struct SpectralWavefunction {
    FreqGrid grid;
    CVector amplitudes;

    double norm_squared() const { return dmtw::norm_squared(amplitudes, grid.dw); }
};

/// Complex temporal envelope psi_env(t), carrier factored out.
struct TemporalEnvelope {
    TimeGrid grid;
    CVector amplitudes;

    double norm_squared() const { return dmtw::norm_squared(amplitudes, grid.dt); }

    RVector intensity() const
    {
        RVector out(amplitudes.size());
        std::transform(amplitudes.begin(), amplitudes.end(), out.begin(),
                       [](const cplx& v) { return std::norm(v); });
        return out;
    }
};

inline void check_shape(std::size_t grid_n, std::size_t data_n, const char* what)
{
    if (grid_n != data_n) throw DataError(std::string(what) + ": amplitude count does not match grid");
}

/// Scales amplitudes so that sum |a|^2 * step == 1.
inline void normalize_in_place(CVector& a, double step)
{
    const double ns = norm_squared(a, step);
    if (!(ns > 0.0) || !std::isfinite(ns)) throw DataError("cannot normalize a zero or non-finite wavefunction");
    const double s = 1.0 / std::sqrt(ns);
    for (auto& v : a) v *= s;
}

inline SpectralWavefunction normalized(SpectralWavefunction s)
{
    check_shape(s.grid.size(), s.amplitudes.size(), "spectral wavefunction");
    normalize_in_place(s.amplitudes, s.grid.dw);
    return s;
}

inline TemporalEnvelope normalized(TemporalEnvelope e)
{
    check_shape(e.grid.size(), e.amplitudes.size(), "temporal envelope");
    normalize_in_place(e.amplitudes, e.grid.dt);
    return e;
}

}  // namespace dmtw
