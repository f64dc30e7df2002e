#include "helpers.hpp"

using namespace dmtw;
using namespace dmtw::test;

namespace {

ExperimentConfig noiseless(Preparation p = Preparation::slit)
{
    ExperimentConfig c;
    c.state.prep = p;
    return c;
}

ExperimentConfig spl(std::uint64_t seed, Preparation p = Preparation::slit)
{
    ExperimentConfig c = noiseless(p);
    c.noise = {NoiseMode::spl, 2500000000LL, 0.58, 7.3e-5, seed};
    return c;
}

ProjectionSet scaled(ProjectionSet s, double k)
{
    for (auto& d : s) {
        for (auto& v : d.values) v *= k;
    }
    return s;
}

}  // namespace

TEST(Raw, DifferencesOfProjections)
{
    const TimeGrid g(3, 1.0);
    ProjectionSet p{{{g, Polarization::D, {0.5, 0.4, 0.3}},
                     {g, Polarization::A, {0.1, 0.4, 0.5}},
                     {g, Polarization::R, {0.2, 0.3, 0.1}},
                     {g, Polarization::L, {0.4, 0.1, 0.1}}}};
    const auto r = raw_reconstruct(p);
    EXPECT_NEAR(r.re[0], 0.4, 1e-15);
    EXPECT_NEAR(r.re[2], -0.2, 1e-15);
    EXPECT_NEAR(r.im[0], -0.2, 1e-15);
    EXPECT_NEAR(r.im[1], 0.2, 1e-15);
    EXPECT_TRUE(r.sigma_re.empty());
    std::swap(p[0], p[1]);
    EXPECT_THROW(raw_reconstruct(p), DataError);
}

TEST(Raw, CountsCarryShotNoiseErrors)
{
    const TimeGrid g(2, 0.5);
    CountSet c;
    const std::array<std::vector<std::int64_t>, 4> n{{{100, 9}, {36, 16}, {50, 0}, {14, 25}}};
    for (auto pol : kPolarizations) c[index_of(pol)] = {g, pol, n[index_of(pol)], 1000, 0.5, 0.2, 1};
    const auto r = raw_reconstruct(c);
    const double scale = 1000 * 0.5 * 0.2 * 0.5;
    EXPECT_NEAR(r.re[0], 64 / scale, 1e-14);
    EXPECT_NEAR(r.im[1], -25 / scale, 1e-14);
    // pooled: (D + A + R + L) / 2 estimates both variances
    EXPECT_NEAR(r.sigma_re[0], 10.0 / scale, 1e-14);
    EXPECT_NEAR(r.sigma_im[1], 5.0 / scale, 1e-14);
    c[0].counts = c[1].counts = c[2].counts = c[3].counts = {0, 0};
    EXPECT_NEAR(raw_reconstruct(c).sigma_re[0], 1.0 / scale, 1e-14);
    c[2].exposure_pulses = 999;
    EXPECT_THROW(raw_reconstruct(c), DataError);
}

TEST(Mask, DefaultValidRegionEndsBeforeTheFirstSincZero)
{
    const TimeGrid g(4096, 0.01);
    const auto m = correction_mask(g, {}, kDefaultSincThreshold);
    double first_invalid = 0.0;
    for (std::size_t k = 2048; k < g.size(); ++k) {
        if (!m.valid[k]) {
            first_invalid = g.t(k);
            break;
        }
    }
    // |sinc(0.54 t)| = 0.05 at t = 5.5256 ps; zeros at ±5.8178 ps.
    EXPECT_NEAR(first_invalid, 5.53, 0.01);
    EXPECT_LT(first_invalid, kTwoPi / 1.08);
    EXPECT_THROW(correction_mask(g, {}, 0.0), ConfigError);
    EXPECT_THROW(correction_mask(g, {}, 1.0), ConfigError);
}

TEST(Mask, RaisingTheThresholdNeverEnlargesTheValidSet)
{
    const TimeGrid g(4096, 0.01);
    std::vector<bool> previous(g.size(), true);
    for (double th = 0.01; th < 0.99; th += 0.02) {
        const auto m = correction_mask(g, {}, th);
        for (std::size_t k = 0; k < g.size(); ++k) EXPECT_FALSE(m.valid[k] && !previous[k]) << th;
        previous = m.valid;
    }
}

TEST(SincCorrection, NegligibleFilterEnvelopeIsIdentity)
{
    const TimeGrid g(64, 0.1);
    RawReconstruction raw{g, RVector(64), RVector(64), {}, {}, DataSource::probability};
    for (std::size_t k = 0; k < 64; ++k) {
        raw.re[k] = std::cos(0.3 * static_cast<double>(k));
        raw.im[k] = std::sin(0.2 * static_cast<double>(k));
    }
    const FilterSpec f{1e-7, 0.0};  // dw * t_max / 2 < 1e-6
    const auto out = sinc_correction(raw, f);
    for (std::size_t k = 0; k < 64; ++k) {
        EXPECT_NEAR(std::abs(out.envelope.amplitudes[k] - cplx(raw.re[k], raw.im[k])), 0.0, 1e-12);
    }
}

TEST(SincCorrection, NoiselessSlitRecoversTheEnvelope)
{
    const auto e = run_experiment(noiseless());
    const auto raw = raw_reconstruct(e.measured);
    const auto corrected = sinc_correction(raw, {});
    const auto norm = normalize_and_phase(corrected.envelope, corrected.mask);
    const auto truth = truth_like(e, Reconstruction{raw, corrected.mask, norm.envelope, {}, {}, 1.0, 0.0});
    const double peak = max_abs(truth.amplitudes);
    for (std::size_t k = 0; k < truth.grid.size(); ++k) {
        if (std::abs(truth.grid.t(k)) > 4.0) continue;
        EXPECT_NEAR(std::abs(norm.envelope.amplitudes[k] - truth.amplitudes[k]), 0.0, 0.01 * peak);
    }
}

TEST(Normalize, IdentityOnNormalizedPositivePeak)
{
    const TimeGrid g(5, 1.0);
    TemporalEnvelope e{g, {0.1, 0.5, 0.8, cplx(0.2, 0.1), 0.0}};
    e = normalized(e);
    const CorrectionMask m{g, RVector(5, 1.0), std::vector<bool>(5, true), 0.05};
    const auto n = normalize_and_phase(e, m);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_NEAR(std::abs(n.envelope.amplitudes[k] - e.amplitudes[k]), 0.0, 1e-15);
    EXPECT_EQ(n.peak_index, 2U);
}

TEST(Normalize, GaugeInvarianceUnderComplexScaling)
{
    const auto e = run_experiment(noiseless(Preparation::stripe));
    const auto c = sinc_correction(raw_reconstruct(e.measured), {});
    const auto a = normalize_and_phase(c.envelope, c.mask);
    TemporalEnvelope scaled_env = c.envelope;
    for (auto& v : scaled_env.amplitudes) v *= cplx(-3.7, 12.5);
    const auto b = normalize_and_phase(scaled_env, c.mask);
    for (std::size_t k = 0; k < a.envelope.amplitudes.size(); ++k) {
        EXPECT_NEAR(std::abs(a.envelope.amplitudes[k] - b.envelope.amplitudes[k]), 0.0, 1e-12);
    }
}

TEST(Normalize, ZeroMassIsAnError)
{
    const TimeGrid g(4, 1.0);
    const CorrectionMask m{g, RVector(4, 1.0), std::vector<bool>(4, true), 0.05};
    EXPECT_THROW(normalize_and_phase(TemporalEnvelope{g, CVector(4, 0.0)}, m), DataError);
}

TEST(Pipeline, GaugeInvarianceOfTheFourDistributions)
{
    for (auto prep : {Preparation::slit, Preparation::slit_glass, Preparation::stripe}) {
        const auto e = run_experiment(noiseless(prep));
        const auto a = reconstruct(e.measured, {});
        const auto b = reconstruct(scaled(e.measured, 123.25), {});
        for (std::size_t k = 0; k < a.envelope.amplitudes.size(); ++k) {
            EXPECT_NEAR(std::abs(a.envelope.amplitudes[k] - b.envelope.amplitudes[k]), 0.0, 1e-12);
        }
    }
}

TEST(Pipeline, NoiselessSlitMatchesGroundTruthPointwise)
{
    const auto e = run_experiment(noiseless());
    const auto r = reconstruct(e.measured, {});
    EXPECT_LT(masked_rel_error(r.envelope, truth_like(e, r), r.mask.valid), 1e-3);
}

TEST(Pipeline, IdealLimitIsExact)
{
    for (auto prep : {Preparation::slit, Preparation::slit_glass, Preparation::stripe}) {
        ExperimentConfig c = noiseless(prep);
        c.gate.shape = GateShape::delta;
        c.reference = ReferenceMode::constant_spectrum;
        const auto e = run_experiment(c);
        const auto r = reconstruct(e.measured, c.filter);
        EXPECT_LT(masked_rel_error(r.envelope, truth_like(e, r), r.mask.valid), 1e-8) << to_string(prep);
    }
}

TEST(Spectrum, NoiselessSlitIsARectOfTheSlitWidth)
{
    const auto e = run_experiment(noiseless());
    const auto r = reconstruct(e.measured, {});
    const auto s = reconstruction_to_spectrum(r.envelope, r.mask);
    EXPECT_EQ(s.spectrum.grid.size(), 1024U);
    EXPECT_NEAR(s.zero_filled_fraction, 1.0 - static_cast<double>(r.mask.valid_count()) / 1024.0, 1e-15);
    EXPECT_NEAR(s.spectrum.norm_squared(), 1.0, 1e-10);
    double inside = 0.0;
    for (std::size_t j = 0; j < s.spectrum.grid.size(); ++j) {
        if (std::abs(s.spectrum.grid.w(j)) <= 2.41 + 0.5 * s.spectrum.grid.dw) {
            inside += std::norm(s.spectrum.amplitudes[j]) * s.spectrum.grid.dw;
        }
    }
    EXPECT_GT(inside, 0.97);
    EXPECT_GE(frequency_fidelity(e.spectrum, s).value, 0.99);
    EXPECT_EQ(reconstruction_to_spectrum(r.envelope, r.mask, 5000).spectrum.grid.size(), 8192U);
}

TEST(Spectrum, CoverglassStepIsRecovered)
{
    const auto e = run_experiment(noiseless(Preparation::slit_glass));
    const auto r = reconstruct(e.measured, {});
    const auto s = reconstruction_to_spectrum(r.envelope, r.mask);
    EXPECT_NEAR(phase_step_estimate(s.spectrum, 1.2, 0.5, -3.0, 3.0), kPi / 2, 0.05);
}

TEST(Spectrum, StripeShowsTwoStepsAndTheRightIntensity)
{
    const auto e = run_experiment(noiseless(Preparation::stripe));
    const auto r = reconstruct(e.measured, {});
    const auto s = reconstruction_to_spectrum(r.envelope, r.mask);
    const StateSpec st;
    const double b1 = st.stripe.steps[0].boundary;
    const double b2 = st.stripe.steps[1].boundary;
    EXPECT_NEAR(phase_step_estimate(s.spectrum, b1, 0.5, -5.0, b2), kPi / 2, 0.05);
    EXPECT_NEAR(phase_step_estimate(s.spectrum, b2, 0.5, b1, 5.0), kPi / 2, 0.05);
    EXPECT_GE(frequency_fidelity(e.spectrum, s).value, 0.985);
}

TEST(Noise, ReducedChiSquareIsConsistentWithShotNoise)
{
    double chi2 = 0.0;
    std::size_t terms = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto e = run_experiment(spl(seed));
        const auto r = reconstruct(*e.counts, {});
        const auto truth = truth_like(e, r);
        for (std::size_t k = 0; k < r.envelope.grid.size(); ++k) {
            if (!r.mask.valid[k]) continue;
            const cplx d = r.envelope.amplitudes[k] - truth.amplitudes[k];
            if (r.sigma_re[k] > 0) {
                chi2 += std::pow(d.real() / r.sigma_re[k], 2);
                ++terms;
            }
            if (r.sigma_im[k] > 0) {
                chi2 += std::pow(d.imag() / r.sigma_im[k], 2);
                ++terms;
            }
        }
    }
    const double reduced = chi2 / static_cast<double>(terms);
    RecordProperty("reduced_chi2", std::to_string(reduced));
    EXPECT_GE(reduced, 0.7);
    EXPECT_LE(reduced, 1.4);
}
