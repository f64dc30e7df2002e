#pragma once

// Scenario runner: end-to-end runs that regenerate the figure and table data
// sets as CSV/JSON files, each with a manifest that is itself a valid config.

#include "dmtw/io.hpp"

#ifndef DMTW_VERSION
#define DMTW_VERSION "0.1.0"
#endif

namespace dmtw {

inline constexpr const char* kVersion = DMTW_VERSION;

/// One state pushed through the apparatus and the reconstruction.
struct StateRun {
    NoiseMode mode = NoiseMode::noiseless;
    ExperimentResult experiment;
    Reconstruction reconstruction;
    ReconstructedSpectrum spectrum;
    FidelityReport time_fidelity;
    FidelityReport frequency_fidelity;
};

inline FidelityReport time_fidelity(const TemporalEnvelope& truth, const Reconstruction& r)
{
    return intensity_fidelity(intensity_of(r.envelope, r.mask.valid), intensity_of(truth), FidelityDomain::time);
}

inline FidelityReport frequency_fidelity(const SpectralWavefunction& truth, const ReconstructedSpectrum& r)
{
    return intensity_fidelity(intensity_of(r.spectrum), intensity_of(truth), FidelityDomain::frequency);
}

inline Reconstruction reconstruct_measurement(const ExperimentResult& e, const RunConfig& c)
{
    const FilterSpec f = filter_spec(c);
    return e.counts ? reconstruct(*e.counts, f, c.sinc_threshold) : reconstruct(e.measured, f, c.sinc_threshold);
}

inline StateRun run_state(const RunConfig& c, NoiseMode mode)
{
    StateRun r;
    r.mode = mode;
    r.experiment = run_experiment(experiment_config(c, mode));
    r.reconstruction = reconstruct_measurement(r.experiment, c);
    r.spectrum = reconstruction_to_spectrum(r.reconstruction.envelope, r.reconstruction.mask, c.fft_min_samples);
    r.time_fidelity = time_fidelity(r.experiment.envelope, r.reconstruction);
    r.frequency_fidelity = frequency_fidelity(r.experiment.spectrum, r.spectrum);
    return r;
}

inline RVector magnitudes(const TemporalEnvelope& e)
{
    RVector m(e.amplitudes.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::abs(e.amplitudes[i]);
    return m;
}

inline FitReport fit_reconstructed_width(const Reconstruction& r)
{
    SincFitOptions opt;
    opt.mask = r.mask.valid;
    return fit_sinc_width(r.envelope.grid, magnitudes(r.envelope), opt);
}

inline FitReport fit_reconstructed_gradient(const Reconstruction& r, const RunConfig& c)
{
    return fit_phase_gradient(r.envelope, {c.phase_window_min_ps, c.phase_window_max_ps});
}

/// Theoretical central-lobe width 4 pi / (alpha w), ps.
inline double width_law(double alpha, double w_mm) { return 2.0 * kTwoPi / (alpha * w_mm); }

// ---------------------------------------------------------------------------
// Sweeps

struct WidthSweepPoint {
    double w_mm = 0.0;
    FitReport fit;
    double theory_ps = 0.0;
    double ratio = 0.0;  // fitted / theory
};

inline std::vector<WidthSweepPoint> width_sweep(RunConfig c, NoiseMode mode,
                                                std::vector<Reconstruction>* keep = nullptr)
{
    c.prep = Preparation::slit;
    c.s_mm = 0.0;
    std::vector<WidthSweepPoint> out;
    for (double w : c.sweep_w_mm) {
        c.w_mm = w;
        const auto e = run_experiment(experiment_config(c, mode));
        auto r = reconstruct_measurement(e, c);
        WidthSweepPoint p{w, fit_reconstructed_width(r), width_law(c.alpha_radps_per_mm, w), 0.0};
        p.ratio = p.fit.params.at("delta_t") / p.theory_ps;
        out.push_back(std::move(p));
        if (keep) keep->push_back(std::move(r));
    }
    return out;
}

struct GradientSweep {
    RVector s_mm;
    std::vector<FitReport> fits;
    LinearLaw law;  // kappa against s
};

inline GradientSweep gradient_sweep(RunConfig c, NoiseMode mode, std::vector<Reconstruction>* keep = nullptr)
{
    c.prep = Preparation::slit;
    GradientSweep out;
    RVector kappa;
    for (double s : c.sweep_s_mm) {
        c.s_mm = s;
        const auto e = run_experiment(experiment_config(c, mode));
        auto r = reconstruct_measurement(e, c);
        out.s_mm.push_back(s);
        out.fits.push_back(fit_reconstructed_gradient(r, c));
        kappa.push_back(out.fits.back().params.at("kappa"));
        if (keep) keep->push_back(std::move(r));
    }
    out.law = fit_linear_law(out.s_mm, kappa);
    return out;
}

struct Table1Row {
    Preparation prep = Preparation::slit;
    FidelityReport cl_time, cl_frequency;
    RVector spl_time, spl_frequency;  // one entry per seed
};

inline double median(RVector v)
{
    if (v.empty()) throw DataError("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// CL (noiseless) and an SPL seed ensemble for one preparation. The noiseless
/// projections are computed once; only the photon counting is repeated.
inline Table1Row table1_row(RunConfig c, Preparation prep)
{
    c.prep = prep;
    Table1Row row;
    row.prep = prep;
    const StateRun cl = run_state(c, NoiseMode::cl);
    row.cl_time = cl.time_fidelity;
    row.cl_frequency = cl.frequency_fidelity;

    const ExperimentConfig ec = experiment_config(c, NoiseMode::spl);
    for (std::size_t k = 0; k < c.ensemble_seeds; ++k) {
        const std::uint64_t seed = c.seed + k;
        CountSet counts;
        for (auto pol : kPolarizations) {
            const auto i = index_of(pol);
            counts[i] = sample_counts(cl.experiment.measured[i], ec.noise.exposure_pulses,
                                      ec.noise.mean_photons_per_pulse, ec.noise.efficiency, seed);
        }
        const Reconstruction r = reconstruct(counts, ec.filter, c.sinc_threshold);
        const auto spec = reconstruction_to_spectrum(r.envelope, r.mask, c.fft_min_samples);
        row.spl_time.push_back(time_fidelity(cl.experiment.envelope, r).value);
        row.spl_frequency.push_back(frequency_fidelity(cl.experiment.spectrum, spec).value);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Registry and file output

struct ScenarioInfo {
    const char* name;
    const char* description;
};

inline const std::vector<ScenarioInfo>& scenarios()
{
    static const std::vector<ScenarioInfo> list{
        {"fig3", "slit state: measured projections, temporal and spectral reconstruction, fidelities, sinc fit"},
        {"fig4", "slit sweeps: sinc width against w, phase gradient against s, and the fitted laws"},
        {"fig5", "slit with coverglass: reconstruction, fidelities and the recovered spectral phase step"},
        {"fig6", "stripe mask with two coverglasses: reconstruction, fidelities and both phase steps"},
        {"table1", "time and frequency fidelities of all three states, CL and SPL seed-ensemble median"},
    };
    return list;
}

inline bool is_scenario(const std::string& name)
{
    const auto& l = scenarios();
    return std::any_of(l.begin(), l.end(), [&](const auto& s) { return name == s.name; });
}

struct ScenarioOutput {
    fs::path dir;
    std::vector<std::string> files;  // relative to dir, in write order
    json summary;

    fs::path file(const std::string& rel)
    {
        files.push_back(rel);
        return dir / rel;
    }
};

namespace detail {

inline std::vector<NoiseMode> scenario_modes(const RunConfig& c)
{
    if (c.noise) return {*c.noise};
    return {NoiseMode::cl, NoiseMode::spl};
}

inline MeasurementHeader header_for(const RunConfig& c, NoiseMode mode)
{
    const bool lit = mode != NoiseMode::noiseless;
    return {Polarization::D, lit ? c.exposure_pulses() : 0, photons_per_pulse(c, mode), c.efficiency, c.seed};
}

inline void write_measurements(ScenarioOutput& out, const std::string& sub, const StateRun& run, const RunConfig& c)
{
    const auto& e = run.experiment;
    for (auto pol : kPolarizations) {
        const auto i = index_of(pol);
        if (e.counts) {
            write_counts_csv(out.file(sub + measurement_file_name(pol, true)), (*e.counts)[i]);
        } else {
            write_probability_csv(out.file(sub + measurement_file_name(pol, false)), e.measured[i],
                                  header_for(c, run.mode));
        }
    }
}

inline void write_truth(ScenarioOutput& out, const ExperimentResult& e)
{
    write_envelope_csv(out.file("truth_time.csv"), e.envelope);
    write_spectrum_csv(out.file("truth_spectrum.csv"), e.spectrum);
}

inline json fidelity_json(const StateRun& r)
{
    return {{"time", to_json(r.time_fidelity)}, {"frequency", to_json(r.frequency_fidelity)}};
}

/// Writes the data files of one state run (per-mode subdirectory) and returns
/// its summary, which the caller completes and writes.
inline json write_state_run(ScenarioOutput& out, const StateRun& run, const RunConfig& c)
{
    const std::string sub = to_string(run.mode) + "/";
    write_measurements(out, sub, run, c);
    write_reconstruction_csv(out.file(sub + "reconstruction_time.csv"), run.reconstruction);
    write_spectrum_csv(out.file(sub + "reconstruction_spectrum.csv"), run.spectrum.spectrum);
    json j = reconstruction_summary(run.reconstruction, &run.spectrum);
    j["fidelity"] = fidelity_json(run);
    j["low_reference"] = run.experiment.reference.low_reference;
    return j;
}

inline std::string mm_tag(double v) { return format_double(v) + "mm"; }

inline void run_single_state(ScenarioOutput& out, RunConfig c, Preparation prep)
{
    c.prep = prep;
    json fidelity, modes;
    bool truth_written = false;
    for (NoiseMode mode : scenario_modes(c)) {
        const StateRun run = run_state(c, mode);
        if (!truth_written) {
            write_truth(out, run.experiment);
            truth_written = true;
        }
        json j = write_state_run(out, run, c);
        fidelity[to_string(mode)] = fidelity_json(run);

        if (prep == Preparation::slit) {
            const FitReport fit = fit_reconstructed_width(run.reconstruction);
            write_json(out.file(to_string(mode) + "/fit_sinc.json"), to_json(fit));
            j["sinc_width_ps"] = fit.params.at("delta_t");
            j["sinc_width_theory_ps"] = width_law(c.alpha_radps_per_mm, c.w_mm);
        } else {
            const auto& s = run.spectrum.spectrum;
            const double margin = 0.5;
            json steps = json::array();
            std::vector<PhaseStepSpec> configured;
            if (prep == Preparation::slit_glass) {
                configured.push_back(PhaseStepSpec(c.step_boundary_radps, c.phase_step_rad));
            } else {
                const auto st = stripe_spec(c);
                configured.assign(st.steps.begin(), st.steps.end());
            }
            const double band_lo = run.experiment.spectrum.grid.lower_edge();
            const double band_hi = run.experiment.spectrum.grid.upper_edge();
            for (std::size_t k = 0; k < configured.size(); ++k) {
                // Each step is judged only against its neighbours, so the
                // window ends at the adjacent boundaries.
                const double lo = k == 0 ? band_lo : configured[k - 1].boundary;
                const double hi = k + 1 < configured.size() ? configured[k + 1].boundary : band_hi;
                const double est = phase_step_estimate(s, configured[k].boundary, margin, lo, hi);
                steps.push_back({{"boundary_radps", configured[k].boundary},
                                 {"configured_rad", configured[k].step},
                                 {"estimated_rad", est}});
            }
            j["phase_steps"] = steps;
        }
        write_json(out.file(to_string(mode) + "/summary.json"), j);
        modes[to_string(mode)] = j;
    }
    write_json(out.file("fidelity.json"), fidelity);
    out.summary = modes;
}

inline void run_fig4(ScenarioOutput& out, const RunConfig& c)
{
    const NoiseMode mode = c.noise.value_or(NoiseMode::cl);
    std::vector<Reconstruction> recs;
    const auto widths = width_sweep(c, mode, &recs);
    std::vector<SweepRow> rows;
    json wj = json::array();
    for (std::size_t i = 0; i < widths.size(); ++i) {
        const auto& p = widths[i];
        rows.push_back({p.w_mm, p.fit.params.at("delta_t"), p.fit.param_stderr.at("delta_t")});
        wj.push_back({{"w_mm", p.w_mm}, {"fitted_ps", rows.back().estimate}, {"theory_ps", p.theory_ps},
                      {"ratio", p.ratio}, {"converged", p.fit.converged}});
        write_reconstruction_csv(out.file("widths/reconstruction_w" + mm_tag(p.w_mm) + ".csv"), recs[i]);
    }
    write_sweep_csv(out.file("width_sweep.csv"), rows);

    recs.clear();
    const auto grad = gradient_sweep(c, mode, &recs);
    rows.clear();
    json gj = json::array();
    for (std::size_t i = 0; i < grad.s_mm.size(); ++i) {
        const auto& f = grad.fits[i];
        rows.push_back({grad.s_mm[i], f.params.at("kappa"), f.param_stderr.at("kappa")});
        gj.push_back({{"s_mm", grad.s_mm[i]}, {"kappa_radps", rows.back().estimate},
                      {"theory_radps", c.alpha_radps_per_mm * grad.s_mm[i]}});
        write_reconstruction_csv(out.file("gradients/reconstruction_s" + mm_tag(grad.s_mm[i]) + ".csv"), recs[i]);
    }
    write_sweep_csv(out.file("gradient_sweep.csv"), rows);

    json summary;
    summary["noise"] = to_string(mode);
    summary["width_law"] = wj;
    summary["gradient_law"] = {{"points", gj},
                               {"slope_radps_per_mm", grad.law.slope},
                               {"slope_stderr", grad.law.slope_stderr},
                               {"kappa0_radps", grad.law.intercept},
                               {"kappa0_stderr", grad.law.intercept_stderr},
                               {"alpha_radps_per_mm", c.alpha_radps_per_mm}};
    write_json(out.file("fig4.json"), summary);
    out.summary = summary;
}

inline void run_table1(ScenarioOutput& out, const RunConfig& c)
{
    auto table = detail::open_for_write(out.file("table1.csv"));
    table << "state,domain,cl,spl_median,spl_min,spl_max\n";
    json j = json::object();
    for (auto prep : {Preparation::slit, Preparation::slit_glass, Preparation::stripe}) {
        const Table1Row row = table1_row(c, prep);
        json rj;
        for (auto dom : {FidelityDomain::time, FidelityDomain::frequency}) {
            const bool t = dom == FidelityDomain::time;
            const RVector& spl = t ? row.spl_time : row.spl_frequency;
            const double cl = (t ? row.cl_time : row.cl_frequency).value;
            const auto [mn, mx] = std::minmax_element(spl.begin(), spl.end());
            const double med = median(spl);
            table << to_string(prep) << ',' << to_string(dom) << ',' << format_double(cl) << ','
                  << format_double(med) << ',' << format_double(*mn) << ',' << format_double(*mx) << '\n';
            rj[to_string(dom)] = {{"cl", cl}, {"spl_median", med}, {"spl_min", *mn}, {"spl_max", *mx},
                                  {"spl_seeds", spl}};
        }
        j[to_string(prep)] = rj;
    }
    json summary = {{"ensemble_seeds", c.ensemble_seeds}, {"first_seed", c.seed}, {"states", j}};
    write_json(out.file("table1.json"), summary);
    out.summary = summary;
}

}  // namespace detail

inline json manifest_json(const RunConfig& c, const std::vector<std::string>& files)
{
    json params = json::object();
    for (const auto& [k, v] : to_key_values(c)) params[k] = v;
    json derived;
    derived["exposure_pulses"] = c.exposure_pulses();
    derived["gate_fwhm_ps"] = c.gate_fwhm_fs * 1e-3;
    derived["window_4pi_over_dw_ps"] = 2.0 * kTwoPi / c.filter_width_radps;
    if (c.gate_shape == GateShape::gaussian) derived["dynamic_range"] = dynamic_range(filter_spec(c), gate_spec(c));
    return {{"scenario", c.scenario}, {"version", kVersion}, {"parameters", params}, {"derived", derived},
            {"files", files}};
}

/// Runs a registered scenario into `dir`. The manifest (`manifest.cfg`) is a
/// complete config: running the same scenario from it reproduces every file.
inline ScenarioOutput run_scenario(const std::string& name, RunConfig c, const fs::path& dir)
{
    if (!is_scenario(name)) throw ConfigError("unknown scenario '" + name + "'");
    c.scenario = name;
    ScenarioOutput out{dir, {}, {}};
    fs::create_directories(dir);
    if (name == "fig3") {
        c.prep = Preparation::slit;
        detail::run_single_state(out, c, Preparation::slit);
    } else if (name == "fig5") {
        c.prep = Preparation::slit_glass;
        detail::run_single_state(out, c, Preparation::slit_glass);
    } else if (name == "fig6") {
        c.prep = Preparation::stripe;
        detail::run_single_state(out, c, Preparation::stripe);
    } else if (name == "fig4") {
        detail::run_fig4(out, c);
    } else {
        detail::run_table1(out, c);
    }
    {
        auto cfg = detail::open_for_write(out.file("manifest.cfg"));
        cfg << "# dmtw " << kVersion << " scenario " << name << "\n" << format_config(c);
    }
    std::vector<std::string> listed = out.files;
    listed.push_back("manifest.json");
    write_json(dir / "manifest.json", manifest_json(c, listed));
    out.files.push_back("manifest.json");
    return out;
}

}  // namespace dmtw
