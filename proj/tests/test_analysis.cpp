#include "helpers.hpp"

using namespace dmtw;
using namespace dmtw::test;

namespace {

TemporalEnvelope linear_phase(double kappa, double intercept = 0.3)
{
    const TimeGrid g(1024, 0.02);
    TemporalEnvelope e{g, CVector(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double t = g.t(i);
        e.amplitudes[i] = std::exp(-t * t / 50.0) * std::polar(1.0, kappa * t + intercept);
    }
    return e;
}

RVector sinc_profile(const TimeGrid& g, double a, double tc, double width)
{
    RVector y(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) y[i] = sinc_magnitude_model(a, tc, width, g.t(i));
    return y;
}

double stddev(const RVector& v)
{
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(SincFit, RecoversExactSyntheticWidth)
{
    const TimeGrid g(585, 0.02);
    const auto rep = fit_sinc_width(g, sinc_profile(g, 0.8, 0.05, 2.607));
    EXPECT_TRUE(rep.converged);
    EXPECT_NEAR(rep.params.at("delta_t") / 2.607, 1.0, 1e-3);
    EXPECT_NEAR(rep.params.at("t_c"), 0.05, 1e-4);
    EXPECT_GT(rep.params.at("delta_t"), 0.0);
}

TEST(SincFit, RefitOfFittedModelIsSelfConsistent)
{
    const TimeGrid g(585, 0.02);
    RVector y = sinc_profile(g, 1.0, 0.0, 2.6);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.01 * std::sin(7.0 * g.t(i));
    const auto first = fit_sinc_width(g, y);
    const auto model = sinc_profile(g, first.params.at("A"), first.params.at("t_c"), first.params.at("delta_t"));
    const auto second = fit_sinc_width(g, model);
    for (const char* k : {"A", "t_c", "delta_t"}) {
        EXPECT_NEAR(second.params.at(k), first.params.at(k), 1e-10 * std::max(1.0, std::abs(first.params.at(k)))) << k;
    }
}

TEST(SincFit, FlatOrTinyInputIsRejected)
{
    const TimeGrid g(64, 0.1);
    EXPECT_THROW(fit_sinc_width(g, RVector(64, 0.3)), DataError);
    EXPECT_THROW(fit_sinc_width(g, RVector(64, 0.0)), DataError);
    EXPECT_THROW(fit_sinc_width(TimeGrid(3, 0.1), RVector{0.1, 1.0, 0.1}), DataError);
    EXPECT_THROW(fit_sinc_width(g, RVector(10, 1.0)), DataError);
}

TEST(SincFit, PipelineSlitFollowsTheWidthLaw)
{
    RunConfig c;
    c.noise = NoiseMode::noiseless;
    const auto points = width_sweep(c, NoiseMode::noiseless);
    ASSERT_EQ(points.size(), 5U);
    for (const auto& p : points) {
        EXPECT_TRUE(p.fit.converged);
        EXPECT_NEAR(p.ratio, 1.0, 0.03) << "w = " << p.w_mm;
    }
    EXPECT_NEAR(points[2].theory_ps, 2.607, 1e-3);
}

TEST(PhaseFit, ExactLinearPhaseSlope)
{
    const auto rep = fit_phase_gradient(linear_phase(1.928), {-6.0, 6.0});
    EXPECT_NEAR(rep.params.at("kappa"), 1.928, 1e-6);
    EXPECT_NEAR(canonical_phase(rep.params.at("intercept") - 0.3), 0.0, 1e-6);
    EXPECT_TRUE(rep.converged);
}

TEST(PhaseFit, SlopeIsIndependentOfWindow)
{
    const auto e = linear_phase(-4.1);
    const double ref = fit_phase_gradient(e, {-6.0, 6.0}).params.at("kappa");
    for (auto w : {std::pair{-2.0, 1.0}, std::pair{3.75, 5.75}, std::pair{-9.0, -4.0}, std::pair{0.0, 0.3}}) {
        EXPECT_NEAR(fit_phase_gradient(e, w).params.at("kappa"), ref, 1e-9);
    }
}

TEST(PhaseFit, WindowAndSampleErrors)
{
    const auto e = linear_phase(1.0);
    EXPECT_THROW(fit_phase_gradient(e, {1.0, 1.0}), ConfigError);
    EXPECT_THROW(fit_phase_gradient(e, {2.0, 1.0}), ConfigError);
    EXPECT_THROW(fit_phase_gradient(e, {-20.0, 1.0}), ConfigError);
    EXPECT_THROW(fit_phase_gradient(e, {0.0, 0.05}), DataError);
}

TEST(PhaseFit, UnwrapRemovesTwoPiJumps)
{
    RVector truth(200), wrapped(200);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = 0.37 * static_cast<double>(i) - 1.0;
        wrapped[i] = std::remainder(truth[i], kTwoPi);
    }
    const auto u = unwrap_phase(wrapped);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(u[i] - u[0], truth[i] - truth[0], 1e-12);
}

TEST(PhaseFit, PipelineShiftedSlitGradient)
{
    RunConfig c;
    c.s_mm = 0.8;
    const auto run = run_state(c, NoiseMode::noiseless);
    const double kappa = fit_reconstructed_gradient(run.reconstruction, c).params.at("kappa");
    EXPECT_NEAR(kappa / (2.41 * 0.8), 1.0, 0.05);
}

TEST(PhaseFit, SweepSlopeMatchesTheDispersion)
{
    RunConfig c;
    const auto sweep = gradient_sweep(c, NoiseMode::noiseless);
    EXPECT_NEAR(sweep.law.slope / 2.41, 1.0, 0.02);
    EXPECT_LT(std::abs(sweep.law.intercept), 0.05);
    const auto kappa0 = sweep.fits.front().params.at("kappa");
    EXPECT_LT(std::abs(kappa0), 0.05);
}

TEST(PhaseFit, OffsetRemovalAndLinearLaw)
{
    const RVector s{0.0, 0.2, 0.4};
    const RVector k{0.1, 0.6, 1.1};
    const auto shifted = remove_offset_at_zero(s, k);
    EXPECT_NEAR(shifted[0], 0.0, 1e-15);
    EXPECT_NEAR(shifted[2], 1.0, 1e-15);
    const auto law = fit_linear_law(s, k);
    EXPECT_NEAR(law.slope, 2.5, 1e-12);
    EXPECT_NEAR(law.intercept, 0.1, 1e-12);
    EXPECT_THROW(remove_offset_at_zero(RVector{0.1, 0.2}, RVector{1.0, 2.0}), DataError);
    EXPECT_THROW(fit_linear_law(RVector{1.0}, RVector{1.0}), DataError);
}

TEST(Fidelity, IdenticalAndDisjoint)
{
    const RVector p{0.1, 0.4, 0.5, 0.0};
    EXPECT_NEAR(classical_fidelity(p, p).value, 1.0, 1e-12);
    RVector scaled = p;
    for (auto& v : scaled) v *= 7.0;
    EXPECT_NEAR(classical_fidelity(p, scaled).value, 1.0, 1e-12);
    EXPECT_EQ(classical_fidelity(RVector{1, 0, 0}, RVector{0, 1, 1}).value, 0.0);
}

TEST(Fidelity, SymmetricAndBounded)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        RVector p(37), q(37);
        for (auto& v : p) v = u(rng);
        for (auto& v : q) v = u(rng);
        const double a = classical_fidelity(p, q).value;
        EXPECT_EQ(a, classical_fidelity(q, p).value);
        EXPECT_LT(a, 1.0 - 1e-12);
        EXPECT_GE(a, 0.0);
    }
}

TEST(Fidelity, NegativesAreClampedAndCounted)
{
    const auto rep = classical_fidelity(RVector{0.5, -0.1, 0.5}, RVector{0.5, 0.2, 0.5}, FidelityDomain::frequency);
    EXPECT_EQ(rep.clamped, 1U);
    EXPECT_EQ(rep.bin_count, 3U);
    EXPECT_EQ(rep.domain, FidelityDomain::frequency);
    EXPECT_NEAR(rep.value, 2 * 0.5 / std::sqrt(1.0 * 1.2), 1e-12);
}

TEST(Fidelity, Errors)
{
    EXPECT_THROW(classical_fidelity(RVector{0, 0}, RVector{1, 1}), DataError);
    EXPECT_THROW(classical_fidelity(RVector{-1, 0}, RVector{1, 1}), DataError);
    EXPECT_THROW(classical_fidelity(RVector{1}, RVector{1, 1}), DataError);
}

TEST(Fidelity, RebinningConservesMass)
{
    const UniformAxis fine{400, 0.01, 0.013};
    const UniformAxis coarse{120, 0.04, 0.0};  // covers the fine axis entirely
    RVector m(fine.n);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::exp(-std::pow(fine.at(i) / 0.5, 2));
    const auto out = rebin_mass(fine, m, coarse);
    EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), std::accumulate(m.begin(), m.end(), 0.0), 1e-9);
}

TEST(Fidelity, DifferentGridsOfTheSameDensityAgree)
{
    auto density = [](const UniformAxis& a) {
        RVector d(a.n);
        for (std::size_t i = 0; i < a.n; ++i) d[i] = std::exp(-a.at(i) * a.at(i));
        return d;
    };
    const UniformAxis a{4096, 0.005, 0.0};
    const UniformAxis b{512, 0.04, 0.0};
    EXPECT_GT(classical_fidelity(a, density(a), b, density(b), FidelityDomain::time).value, 0.9999);
}

TEST(Fidelity, NoiselessSlitTimeDomain)
{
    const auto run = run_state(RunConfig{}, NoiseMode::noiseless);
    EXPECT_GE(run.time_fidelity.value, 0.999);
    EXPECT_LE(run.time_fidelity.value, 1.0);
}

TEST(DynamicRange, FormulaValue)
{
    EXPECT_NEAR(dynamic_range({1.08, 0.0}, {GateShape::gaussian, 0.0792}), 146.9, 0.1);
    EXPECT_NEAR(dynamic_range({0.54, 0.0}, {GateShape::gaussian, 0.0792}) /
                    dynamic_range({1.08, 0.0}, {GateShape::gaussian, 0.0792}),
                2.0, 1e-12);
    EXPECT_NEAR(dynamic_range({1.08, 0.0}, {GateShape::gaussian, 2.0 * kTwoPi / 1.08}), 1.0, 1e-12);
    EXPECT_THROW(dynamic_range({1.08, 0.0}, {GateShape::delta, 0.0}), ConfigError);
}

TEST(Noise, WidthScatterFallsAsSquareRootOfExposure)
{
    RunConfig c;
    c.efficiency = 7.3e-5;
    const StateRun cl = run_state(c, NoiseMode::noiseless);
    const ExperimentConfig ec = experiment_config(c, NoiseMode::spl);
    auto scatter = [&](std::int64_t exposure) {
        RVector widths;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            CountSet counts;
            for (auto pol : kPolarizations) {
                const auto i = index_of(pol);
                counts[i] = sample_counts(cl.experiment.measured[i], exposure, ec.noise.mean_photons_per_pulse,
                                          ec.noise.efficiency, seed);
            }
            widths.push_back(fit_reconstructed_width(reconstruct(counts, ec.filter)).params.at("delta_t"));
        }
        return stddev(widths);
    };
    const double ratio = scatter(4 * ec.noise.exposure_pulses) / scatter(ec.noise.exposure_pulses);
    RecordProperty("scatter_ratio", std::to_string(ratio));
    EXPECT_GE(ratio, 0.4);
    EXPECT_LE(ratio, 0.6);
}
