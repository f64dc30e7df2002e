#include "helpers.hpp"

using namespace dmtw;
using namespace dmtw::test;

TEST(Grid, SincHandlesTheOrigin)
{
    EXPECT_EQ(sinc(0.0), 1.0);
    EXPECT_NEAR(sinc(1e-9), 1.0, 1e-16);
    EXPECT_NEAR(sinc(kPi), 0.0, 1e-16);
    EXPECT_NEAR(sinc(1.0), std::sin(1.0), 1e-16);
}

TEST(Grid, AxisPlacesCenterAtHalfIndex)
{
    const TimeGrid g(8, 0.5, 1.0);
    EXPECT_DOUBLE_EQ(g.t(4), 1.0);
    EXPECT_DOUBLE_EQ(g.t(0), -1.0);
    EXPECT_EQ(g.axis().nearest(1.26), 5U);
    EXPECT_EQ(g.axis().nearest(-100.0), 0U);
    EXPECT_EQ(g.axis().nearest(100.0), 7U);

    const TimeGrid odd(5, 1.0);
    EXPECT_DOUBLE_EQ(odd.t(0), -2.0);
    EXPECT_DOUBLE_EQ(odd.t(4), 2.0);
}

TEST(Grid, RejectsDegenerateGrids)
{
    EXPECT_THROW(TimeGrid(1, 0.1), ConfigError);
    EXPECT_THROW(TimeGrid(8, 0.0), ConfigError);
    EXPECT_THROW(TimeGrid(8, -1.0), ConfigError);
    EXPECT_THROW(FreqGrid(8, std::nan("")), ConfigError);
}

TEST(Grid, ConjugateGridsSatisfyTheSamplingRelation)
{
    const TimeGrid g(4096, 0.01);
    const FreqGrid f = g.conjugate();
    EXPECT_NEAR(static_cast<double>(g.size()) * g.dt * f.dw, kTwoPi, 1e-12);
    EXPECT_EQ(f.conjugate(), g);
    EXPECT_TRUE(g.fft_compatible());
    EXPECT_FALSE(TimeGrid(585, 0.02).fft_compatible());
}

TEST(Fourier, SingleSpectralSampleGivesPlaneWaveWithPositiveSign)
{
    const TimeGrid tg(64, 0.1);
    const FreqGrid fg = tg.conjugate();
    SpectralWavefunction s{fg, CVector(64, 0.0)};
    const std::size_t j = 32 + 5;
    s.amplitudes[j] = 1.0;
    const TemporalEnvelope e = spectrum_to_temporal(s);
    for (std::size_t k = 0; k < 64; ++k) {
        const cplx expect = fg.dw * kInvSqrt2Pi * std::polar(1.0, fg.w(j) * tg.t(k));
        EXPECT_NEAR(std::abs(e.amplitudes[k] - expect), 0.0, 1e-14);
    }
}

TEST(Fourier, ParsevalHoldsForEveryPreparation)
{
    for (auto p : {Preparation::slit, Preparation::slit_glass, Preparation::stripe}) {
        const auto s = prepare_spectrum(state(p));
        const auto e = spectrum_to_temporal(s);
        EXPECT_NEAR(e.norm_squared(), s.norm_squared(), 1e-10) << to_string(p);
        EXPECT_NEAR(e.norm_squared(), 1.0, 1e-10);
    }
}

TEST(Fourier, RoundTripIsIdentity)
{
    for (auto p : {Preparation::slit, Preparation::slit_glass, Preparation::stripe}) {
        const auto s = prepare_spectrum(state(p, 2.0, 0.37));
        const auto back = temporal_to_spectrum(spectrum_to_temporal(s));
        double err = 0.0;
        for (std::size_t j = 0; j < s.amplitudes.size(); ++j) {
            err = std::max(err, std::abs(back.amplitudes[j] - s.amplitudes[j]));
        }
        EXPECT_LT(err, 1e-10 * max_abs(s.amplitudes)) << to_string(p);
        EXPECT_EQ(back.grid, s.grid);
    }
}

TEST(Fourier, RoundTripWithOffsetCenters)
{
    const TimeGrid tg(256, 0.05, 1.3);
    TemporalEnvelope e{tg, CVector(256)};
    for (std::size_t k = 0; k < 256; ++k) {
        const double t = tg.t(k) - 1.0;
        e.amplitudes[k] = std::exp(-t * t) * std::polar(1.0, 0.7 * t);
    }
    const auto s = temporal_to_spectrum(e, 0.4);
    EXPECT_NEAR(s.grid.w_center, 0.4, 0.0);
    const auto back = spectrum_to_temporal(s, 1.3);
    for (std::size_t k = 0; k < 256; ++k) EXPECT_NEAR(std::abs(back.amplitudes[k] - e.amplitudes[k]), 0.0, 1e-12);
}

TEST(Fourier, GaussianMatchesAnalyticTransform)
{
    // exp(-t^2/2) <-> exp(-w^2/2) under the unitary convention.
    const TimeGrid tg(512, 0.05);
    TemporalEnvelope e{tg, CVector(512)};
    for (std::size_t k = 0; k < 512; ++k) e.amplitudes[k] = std::exp(-0.5 * tg.t(k) * tg.t(k));
    const auto s = temporal_to_spectrum(e);
    for (std::size_t j = 0; j < 512; ++j) {
        const double w = s.grid.w(j);
        EXPECT_NEAR(std::abs(s.amplitudes[j] - std::exp(-0.5 * w * w)), 0.0, 1e-12);
    }
}

TEST(Fourier, TransformsRequirePowerOfTwo)
{
    const TimeGrid g(6, 0.1);
    EXPECT_THROW(temporal_to_spectrum(TemporalEnvelope{g, CVector(6, 1.0)}), ConfigError);
    EXPECT_THROW(temporal_to_spectrum(TemporalEnvelope{TimeGrid(8, 0.1), CVector(7, 1.0)}), DataError);
}

TEST(Fourier, CircularConvolutionMatchesDirectSum)
{
    const std::size_t n = 32;
    RVector x(n), k(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::sin(0.3 * static_cast<double>(i)) + 1.5;
        k[i] = std::exp(-0.2 * static_cast<double>(i));
    }
    const RVector y = circular_convolve(x, k);
    for (std::size_t j = 0; j < n; ++j) {
        double d = 0.0;
        for (std::size_t m = 0; m < n; ++m) d += k[m] * x[(j + n - m) % n];
        EXPECT_NEAR(y[j], d, 1e-12);
    }
}
