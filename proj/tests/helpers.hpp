#pragma once

#include <gtest/gtest.h>

#include <numeric>

#include "dmtw/dmtw.hpp"

namespace dmtw::test {

inline StateSpec state(Preparation p, double w_mm = 2.0, double s_mm = 0.0)
{
    StateSpec s;
    s.prep = p;
    s.slit.w_mm = w_mm;
    s.slit.s_mm = s_mm;
    return s;
}

inline double max_abs(std::span<const cplx> v)
{
    double m = 0.0;
    for (const auto& x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Samples a full-grid envelope at the points of `g` (which must coincide).
inline TemporalEnvelope sample_on(const TemporalEnvelope& full, const TimeGrid& g)
{
    TemporalEnvelope out{g, CVector(g.size())};
    const UniformAxis a = full.grid.axis();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t k = a.nearest(g.t(i));
        EXPECT_NEAR(a.at(k), g.t(i), 1e-9);
        out.amplitudes[i] = full.amplitudes[k];
    }
    return out;
}

/// Ground truth at the scan points with the reconstruction's conventions
/// (unit norm over the valid mask, real positive peak).
inline TemporalEnvelope truth_like(const ExperimentResult& e, const Reconstruction& r)
{
    return normalize_and_phase(sample_on(e.envelope, r.envelope.grid), r.mask).envelope;
}

/// max |a - b| over valid samples, relative to max |b|.
inline double masked_rel_error(const TemporalEnvelope& a, const TemporalEnvelope& b, const std::vector<bool>& valid)
{
    double err = 0.0;
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (valid[i]) err = std::max(err, std::abs(a.amplitudes[i] - b.amplitudes[i]));
    }
    return err / max_abs(b.amplitudes);
}

inline fs::path temp_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("dmtw_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace dmtw::test
