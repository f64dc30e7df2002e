// dmtw command-line front end.
//
// Exit codes: 0 success, 2 configuration error (including bad usage),
// 3 data error, 1 anything else.

#include <iostream>

#include "CLI11.hpp"

#include "dmtw/dmtw.hpp"

namespace {

using namespace dmtw;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string noise;
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_noise = true)
{
    cmd->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "random seed override");
    if (with_noise) cmd->add_option("--noise", f.noise, "noiseless, cl or spl");
    cmd->add_option("--out", f.out, "output location");
}

RunConfig resolve(const CommonFlags& f)
{
    RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
    if (f.seed) c.seed = *f.seed;
    if (!f.noise.empty()) c.noise = parse_noise_mode(f.noise);
    return c;
}

fs::path out_dir(const CommonFlags& f, const std::string& fallback)
{
    return f.out.empty() ? fs::path(fallback) : fs::path(f.out);
}

void emit(const json& j, const std::string& out)
{
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(out, j);
    }
}

int cmd_simulate(const CommonFlags& f)
{
    const RunConfig c = resolve(f);
    const NoiseMode mode = c.noise.value_or(NoiseMode::noiseless);
    const fs::path dir = out_dir(f, "simulate_out");
    const ExperimentResult e = run_experiment(experiment_config(c, mode));
    if (e.counts) {
        write_count_set(dir, *e.counts);
    } else {
        MeasurementHeader h{Polarization::D, mode == NoiseMode::noiseless ? 0 : c.exposure_pulses(),
                            photons_per_pulse(c, mode), c.efficiency, c.seed};
        write_projection_set(dir, e.measured, h);
    }
    write_envelope_csv(dir / "truth_time.csv", e.envelope);
    write_spectrum_csv(dir / "truth_spectrum.csv", e.spectrum);
    {
        std::ofstream cfg(dir / "manifest.cfg", std::ios::binary);
        cfg << "# dmtw " << kVersion << " simulate\n" << format_config(c);
    }
    std::cout << "wrote " << dir.string() << " (" << to_string(mode) << ", "
              << (e.reference.low_reference ? "LOW reference" : "reference ok") << ")\n";
    return 0;
}

int cmd_reconstruct(const CommonFlags& f, const std::string& in)
{
    const RunConfig c = resolve(f);
    const fs::path dir = out_dir(f, "reconstruct_out");
    const auto files = read_measurement_dir(in);
    const Reconstruction r = looks_like_counts(files)
                                 ? reconstruct(ingest_counts(in), filter_spec(c), c.sinc_threshold)
                                 : reconstruct(ingest_probabilities(in), filter_spec(c), c.sinc_threshold);
    const ReconstructedSpectrum s = reconstruction_to_spectrum(r.envelope, r.mask, c.fft_min_samples);
    write_reconstruction_csv(dir / "reconstruction_time.csv", r);
    write_spectrum_csv(dir / "reconstruction_spectrum.csv", s.spectrum);
    json summary = reconstruction_summary(r, &s);
    summary["filter_width_radps"] = c.filter_width_radps;
    write_json(dir / "summary.json", summary);
    std::cout << "wrote " << dir.string() << " (" << r.mask.valid_count() << " valid of "
              << r.mask.valid.size() << " samples)\n";
    return 0;
}

int cmd_fit(const CommonFlags& f, const std::string& in, const std::string& model)
{
    const RunConfig c = resolve(f);
    const ReconstructionTable tab = read_reconstruction_csv(in);
    FitReport rep;
    if (model == "sinc") {
        SincFitOptions opt;
        opt.mask = tab.valid;
        rep = fit_sinc_width(tab.envelope.grid, magnitudes(tab.envelope), opt);
    } else if (model == "phase") {
        TemporalEnvelope env = tab.envelope;
        for (std::size_t j = 0; j < env.amplitudes.size(); ++j) {
            if (!tab.valid[j]) env.amplitudes[j] = 0.0;
        }
        rep = fit_phase_gradient(env, {c.phase_window_min_ps, c.phase_window_max_ps});
    } else {
        throw ConfigError("--model must be sinc or phase");
    }
    emit(to_json(rep), f.out);
    return 0;
}

/// Intensity from a reconstruction CSV (masked), a t_ps,re,im or a w_radps,re,im file.
std::pair<SampledIntensity, FidelityDomain> load_intensity(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string head;
    std::getline(in, head);
    head = trim(head);
    if (head == "t_ps,re,im,sigma_re,sigma_im,valid") {
        const auto tab = read_reconstruction_csv(path);
        return {intensity_of(tab.envelope, tab.valid), FidelityDomain::time};
    }
    const auto cols = read_numeric_csv(path, 3);
    const TimeGrid g = infer_grid(cols[0], path.filename().string());
    CVector a(cols[0].size());
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = {cols[1][j], cols[2][j]};
    SampledIntensity s = intensity_of(TemporalEnvelope{g, std::move(a)});
    if (head.rfind("t_ps,", 0) == 0) return {s, FidelityDomain::time};
    if (head.rfind("w_radps,", 0) == 0) return {s, FidelityDomain::frequency};
    throw DataError(path.filename().string() + ": unrecognized header '" + head + "'");
}

int cmd_fidelity(const CommonFlags& f, const std::string& a, const std::string& b)
{
    const auto [pa, da] = load_intensity(a);
    const auto [pb, db] = load_intensity(b);
    if (da != db) throw DataError("fidelity inputs are in different domains (time vs frequency)");
    emit(to_json(intensity_fidelity(pa, pb, da)), f.out);
    return 0;
}

int cmd_scenario(const CommonFlags& f, const std::string& name)
{
    const RunConfig c = resolve(f);
    const fs::path dir = out_dir(f, "scenario_" + name);
    const ScenarioOutput out = run_scenario(name, c, dir);
    std::cout << "scenario " << name << ": wrote " << out.files.size() << " files to " << dir.string() << '\n';
    return 0;
}

int run(int argc, char** argv)
{
    CLI::App app{"dmtw: direct measurement of single-photon temporal wavefunctions (simulation and reconstruction)"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    CommonFlags sim_f, rec_f, fit_f, fid_f, scen_f;
    std::string rec_in, fit_in, fit_model = "sinc", fid_a, fid_b, scen_name;

    auto* sim = app.add_subcommand("simulate", "simulate D/A/R/L projections (probabilities or counts)");
    add_common(sim, sim_f);

    auto* rec = app.add_subcommand("reconstruct", "reconstruct the envelope from a directory of D/A/R/L CSVs");
    add_common(rec, rec_f, false);
    rec->add_option("--in", rec_in, "directory holding the four measurement CSVs")->required();

    auto* fit = app.add_subcommand("fit", "fit a sinc width or a phase gradient to a reconstruction CSV");
    add_common(fit, fit_f, false);
    fit->add_option("--in", fit_in, "reconstruction CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--model", fit_model, "sinc or phase")->check(CLI::IsMember({"sinc", "phase"}));

    auto* fid = app.add_subcommand("fidelity", "classical fidelity between two intensity distributions");
    add_common(fid, fid_f, false);
    fid->add_option("a", fid_a, "first CSV")->required()->check(CLI::ExistingFile);
    fid->add_option("b", fid_b, "second CSV")->required()->check(CLI::ExistingFile);

    auto* scen = app.add_subcommand("scenario", "run a registered scenario");
    add_common(scen, scen_f);
    scen->add_option("name", scen_name, "scenario name (see list-scenarios)")->required();

    auto* list = app.add_subcommand("list-scenarios", "list registered scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "dmtw: usage error: " << e.what() << '\n';
        return 2;
    }

    if (sim->parsed()) return cmd_simulate(sim_f);
    if (rec->parsed()) return cmd_reconstruct(rec_f, rec_in);
    if (fit->parsed()) return cmd_fit(fit_f, fit_in, fit_model);
    if (fid->parsed()) return cmd_fidelity(fid_f, fid_a, fid_b);
    if (scen->parsed()) return cmd_scenario(scen_f, scen_name);
    if (list->parsed()) {
        for (const auto& s : scenarios()) std::cout << s.name << "\t" << s.description << '\n';
        return 0;
    }
    return 2;
}

std::string one_line(std::string s)
{
    for (auto& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

}  // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const dmtw::ConfigError& e) {
        std::cerr << "dmtw: config error: " << one_line(e.what()) << '\n';
        return 2;
    } catch (const dmtw::DataError& e) {
        std::cerr << "dmtw: data error: " << one_line(e.what()) << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "dmtw: error: " << one_line(e.what()) << '\n';
        return 1;
    }
}
