#pragma once

// Run configuration (key-value text with units in the key names), the
// count/probability CSV exchange format, reconstruction CSVs and JSON reports.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "dmtw/analysis.hpp"
#include "dmtw/reconstruct.hpp"

namespace dmtw {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class E>
double parse_double(std::string_view s, const std::string& what)
{
    const std::string t = trim(s);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v)) {
        throw E(what + ": expected a number, got '" + t + "'");
    }
    return v;
}

template <class E, class Int>
Int parse_int(std::string_view s, const std::string& what)
{
    const std::string t = trim(s);
    Int v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw E(what + ": expected an integer, got '" + t + "'");
    }
    return v;
}

inline RVector parse_double_list(std::string_view s, const std::string& what)
{
    RVector out;
    if (trim(s).empty()) return out;
    for (const auto& item : split(s, ',')) out.push_back(parse_double<ConfigError>(item, what));
    return out;
}

inline std::string format_double_list(std::span<const double> v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
    std::string scenario;

    // state
    Preparation prep = Preparation::slit;
    double w_mm = 2.0;
    double s_mm = 0.0;
    double alpha_radps_per_mm = 2.41;
    double phase_step_rad = kPi / 2.0;
    double step_boundary_radps = 1.2;
    double phase_step2_rad = kPi / 2.0;
    double stripe_gap_mm = 0.5;
    double stripe_band_mm = 0.75;
    std::size_t stripe_count = 3;
    std::vector<PassBand> stripe_bands;  // explicit layout; empty: periodic
    std::size_t n = 4096;
    double dt_ps = 0.01;

    // apparatus
    double filter_width_radps = 1.08;
    double filter_center_radps = 0.0;
    ReferenceMode reference = ReferenceMode::exact;
    GateShape gate_shape = GateShape::gaussian;
    double gate_fwhm_fs = 79.2;
    std::size_t scan_points = 585;  // 0: keep the full simulation grid
    double scan_step_fs = 20.0;
    double scan_center_ps = 0.0;

    // light and detection
    std::optional<NoiseMode> noise;  // unset: scenarios run both CL and SPL
    double cl_photons_per_pulse = 366.0;
    double spl_photons_per_pulse = 0.58;
    double efficiency = 1.0;
    double exposure_s = 25.0;
    double rep_rate_mhz = 100.0;
    std::uint64_t seed = 1;
    std::size_t ensemble_seeds = 20;

    // reconstruction and analysis
    double sinc_threshold = kDefaultSincThreshold;
    double phase_window_min_ps = -1.0;
    double phase_window_max_ps = 1.0;
    std::size_t fft_min_samples = 0;
    RVector sweep_w_mm{1.4, 1.7, 2.0, 2.3, 2.6};
    RVector sweep_s_mm{0.0, 0.2, 0.4, 0.6, 0.8};

    std::int64_t exposure_pulses() const
    {
        return static_cast<std::int64_t>(std::llround(exposure_s * rep_rate_mhz * 1e6));
    }
};

namespace detail {

struct ConfigKey {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline std::string format_bands(const std::vector<PassBand>& bands)
{
    std::string out;
    for (std::size_t i = 0; i < bands.size(); ++i) {
        if (i) out += ',';
        out += format_double(bands[i].center_mm) + ':' + format_double(bands[i].width_mm);
    }
    return out;
}

inline std::vector<PassBand> parse_bands(const std::string& v)
{
    std::vector<PassBand> out;
    if (trim(v).empty()) return out;
    for (const auto& item : split(v, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw ConfigError("stripe_bands_mm: expected center:width pairs, got '" + item + "'");
        out.push_back({parse_double<ConfigError>(parts[0], "stripe_bands_mm"),
                       parse_double<ConfigError>(parts[1], "stripe_bands_mm")});
    }
    return out;
}

inline std::string reference_name(ReferenceMode m) { return m == ReferenceMode::exact ? "exact" : "constant"; }

inline ReferenceMode parse_reference(const std::string& s)
{
    if (s == "exact") return ReferenceMode::exact;
    if (s == "constant") return ReferenceMode::constant_spectrum;
    throw ConfigError("reference_mode must be exact or constant, got '" + s + "'");
}

inline GateShape parse_gate_shape(const std::string& s)
{
    if (s == "gaussian") return GateShape::gaussian;
    if (s == "delta") return GateShape::delta;
    throw ConfigError("gate_shape must be gaussian or delta, got '" + s + "'");
}

#define DMTW_REAL_KEY(key, field)                                                                 \
    ConfigKey{key, [](RunConfig& c, const std::string& v) { c.field = parse_double<ConfigError>(v, key); }, \
              [](const RunConfig& c) { return format_double(c.field); }}
#define DMTW_SIZE_KEY(key, field)                                                                             \
    ConfigKey{key, [](RunConfig& c, const std::string& v) { c.field = parse_int<ConfigError, std::size_t>(v, key); }, \
              [](const RunConfig& c) { return std::to_string(c.field); }}

inline const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys{
        {"scenario", [](RunConfig& c, const std::string& v) { c.scenario = v; },
         [](const RunConfig& c) { return c.scenario; }},
        {"prep", [](RunConfig& c, const std::string& v) { c.prep = parse_preparation(v); },
         [](const RunConfig& c) { return to_string(c.prep); }},
        DMTW_REAL_KEY("w_mm", w_mm),
        DMTW_REAL_KEY("s_mm", s_mm),
        DMTW_REAL_KEY("alpha_thz_per_mm", alpha_radps_per_mm),
        DMTW_REAL_KEY("phase_step_rad", phase_step_rad),
        DMTW_REAL_KEY("step_boundary_radps", step_boundary_radps),
        DMTW_REAL_KEY("phase_step2_rad", phase_step2_rad),
        DMTW_REAL_KEY("stripe_gap_mm", stripe_gap_mm),
        DMTW_REAL_KEY("stripe_band_mm", stripe_band_mm),
        DMTW_SIZE_KEY("stripe_count", stripe_count),
        {"stripe_bands_mm", [](RunConfig& c, const std::string& v) { c.stripe_bands = parse_bands(v); },
         [](const RunConfig& c) { return format_bands(c.stripe_bands); }},
        DMTW_SIZE_KEY("n", n),
        DMTW_REAL_KEY("dt_ps", dt_ps),
        DMTW_REAL_KEY("filter_width_thz", filter_width_radps),
        DMTW_REAL_KEY("filter_center_radps", filter_center_radps),
        {"reference_mode", [](RunConfig& c, const std::string& v) { c.reference = parse_reference(v); },
         [](const RunConfig& c) { return reference_name(c.reference); }},
        {"gate_shape", [](RunConfig& c, const std::string& v) { c.gate_shape = parse_gate_shape(v); },
         [](const RunConfig& c) { return std::string(c.gate_shape == GateShape::delta ? "delta" : "gaussian"); }},
        DMTW_REAL_KEY("gate_fwhm_fs", gate_fwhm_fs),
        DMTW_SIZE_KEY("scan_points", scan_points),
        DMTW_REAL_KEY("scan_step_fs", scan_step_fs),
        DMTW_REAL_KEY("scan_center_ps", scan_center_ps),
        {"noise",
         [](RunConfig& c, const std::string& v) {
             if (v.empty() || v == "both") {
                 c.noise.reset();
             } else {
                 c.noise = parse_noise_mode(v);
             }
         },
         [](const RunConfig& c) { return c.noise ? to_string(*c.noise) : std::string("both"); }},
        DMTW_REAL_KEY("cl_photons_per_pulse", cl_photons_per_pulse),
        DMTW_REAL_KEY("spl_photons_per_pulse", spl_photons_per_pulse),
        DMTW_REAL_KEY("efficiency", efficiency),
        DMTW_REAL_KEY("exposure_s", exposure_s),
        DMTW_REAL_KEY("rep_rate_mhz", rep_rate_mhz),
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_int<ConfigError, std::uint64_t>(v, "seed"); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        DMTW_SIZE_KEY("ensemble_seeds", ensemble_seeds),
        DMTW_REAL_KEY("sinc_threshold", sinc_threshold),
        DMTW_REAL_KEY("phase_window_min_ps", phase_window_min_ps),
        DMTW_REAL_KEY("phase_window_max_ps", phase_window_max_ps),
        DMTW_SIZE_KEY("fft_min_samples", fft_min_samples),
        {"sweep_w_mm", [](RunConfig& c, const std::string& v) { c.sweep_w_mm = parse_double_list(v, "sweep_w_mm"); },
         [](const RunConfig& c) { return format_double_list(c.sweep_w_mm); }},
        {"sweep_s_mm", [](RunConfig& c, const std::string& v) { c.sweep_s_mm = parse_double_list(v, "sweep_s_mm"); },
         [](const RunConfig& c) { return format_double_list(c.sweep_s_mm); }},
    };
    return keys;
}

#undef DMTW_REAL_KEY
#undef DMTW_SIZE_KEY

}  // namespace detail

/// Applies `key = value` lines on top of `base`. '#' starts a comment.
inline RunConfig parse_config(std::string_view text, RunConfig base = {})
{
    const auto& keys = detail::config_keys();
    std::map<std::string, std::size_t> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return key == k.name; });
        if (it == keys.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (seen.count(key)) {
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "' (first on line " +
                              std::to_string(seen[key]) + ")");
        }
        seen[key] = lineno;
        it->set(base, value);
    }
    return base;
}

inline RunConfig load_config(const fs::path& path, RunConfig base = {})
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

/// Every key with its current value, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& c)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : detail::config_keys()) out.emplace_back(k.name, k.get(c));
    return out;
}

inline std::string format_config(const RunConfig& c)
{
    std::string out;
    for (const auto& [k, v] : to_key_values(c)) out += k + " = " + v + "\n";
    return out;
}

inline StripeMaskSpec stripe_spec(const RunConfig& c)
{
    if (c.stripe_bands.empty()) {
        return StripeMaskSpec::periodic(c.stripe_gap_mm, c.stripe_band_mm, c.stripe_count, c.alpha_radps_per_mm,
                                        c.phase_step_rad, c.phase_step2_rad);
    }
    StripeMaskSpec s;
    s.alpha = c.alpha_radps_per_mm;
    s.bands = c.stripe_bands;
    s.validate();
    // Steps sit in the middle of the first two opaque gaps (or past the last band).
    std::array<double, 2> at{};
    for (std::size_t g = 0; g < 2; ++g) {
        if (g + 1 < s.bands.size()) {
            const auto& a = s.bands[g];
            const auto& b = s.bands[g + 1];
            at[g] = 0.5 * (a.center_mm + 0.5 * a.width_mm + b.center_mm - 0.5 * b.width_mm);
        } else {
            const auto& last = s.bands.back();
            at[g] = last.center_mm + 0.5 * last.width_mm + 0.5 * c.stripe_gap_mm * static_cast<double>(g + 1);
        }
    }
    s.gap_mm = c.stripe_gap_mm;
    s.steps = {PhaseStepSpec(s.alpha * at[0], c.phase_step_rad), PhaseStepSpec(s.alpha * at[1], c.phase_step2_rad)};
    return s;
}

inline StateSpec state_spec(const RunConfig& c)
{
    StateSpec s;
    s.prep = c.prep;
    s.slit = {c.w_mm, c.s_mm, c.alpha_radps_per_mm};
    s.glass = PhaseStepSpec(c.step_boundary_radps, c.phase_step_rad);
    s.stripe = stripe_spec(c);
    s.n = c.n;
    s.dt_ps = c.dt_ps;
    return s;
}

inline FilterSpec filter_spec(const RunConfig& c) { return {c.filter_width_radps, c.filter_center_radps}; }

inline GateSpec gate_spec(const RunConfig& c) { return {c.gate_shape, c.gate_fwhm_fs * 1e-3}; }

inline double photons_per_pulse(const RunConfig& c, NoiseMode mode)
{
    switch (mode) {
        case NoiseMode::noiseless: return 0.0;
        case NoiseMode::cl: return c.cl_photons_per_pulse;
        case NoiseMode::spl: return c.spl_photons_per_pulse;
    }
    return 0.0;
}

inline ExperimentConfig experiment_config(const RunConfig& c, NoiseMode mode)
{
    if (!(c.exposure_s >= 0.0) || !(c.rep_rate_mhz >= 0.0)) throw ConfigError("exposure and rep rate must be >= 0");
    ExperimentConfig e;
    e.state = state_spec(c);
    e.filter = filter_spec(c);
    e.gate = gate_spec(c);
    e.reference = c.reference;
    if (c.scan_points == 0) {
        e.scan.reset();
    } else {
        e.scan = DelayScan{c.scan_points, c.scan_step_fs * 1e-3, c.scan_center_ps};
    }
    e.noise = {mode, c.exposure_pulses(), photons_per_pulse(c, mode), c.efficiency, c.seed};
    return e;
}

// ---------------------------------------------------------------------------
// Count / probability CSV

struct MeasurementHeader {
    Polarization pol = Polarization::D;
    std::int64_t exposure_pulses = 0;
    double mean_photons = 0.0;
    double efficiency = 1.0;
    std::uint64_t seed = 0;
};

inline std::string format_header(const MeasurementHeader& h)
{
    return std::string("# pol=") + to_char(h.pol) + " exposure_pulses=" + std::to_string(h.exposure_pulses) +
           " mean_photons=" + format_double(h.mean_photons) + " efficiency=" + format_double(h.efficiency) +
           " seed=" + std::to_string(h.seed);
}

inline MeasurementHeader parse_header(const std::string& line, const std::string& where)
{
    auto bad = [&](const std::string& why) { return DataError(where + ": malformed header (" + why + ")"); };
    if (line.rfind("# ", 0) != 0) throw bad("must start with '# '");
    std::map<std::string, std::string> kv;
    std::istringstream in(line.substr(2));
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) throw bad("token '" + tok + "' is not key=value");
        if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second) throw bad("repeated key " + tok.substr(0, eq));
    }
    for (const char* k : {"pol", "exposure_pulses", "mean_photons", "efficiency", "seed"}) {
        if (!kv.count(k)) throw bad(std::string("missing ") + k);
    }
    if (kv.size() != 5) throw bad("unexpected keys");
    MeasurementHeader h;
    try {
        h.pol = parse_polarization(kv["pol"]);
        h.exposure_pulses = parse_int<DataError, std::int64_t>(kv["exposure_pulses"], "exposure_pulses");
        h.mean_photons = parse_double<DataError>(kv["mean_photons"], "mean_photons");
        h.efficiency = parse_double<DataError>(kv["efficiency"], "efficiency");
        h.seed = parse_int<DataError, std::uint64_t>(kv["seed"], "seed");
    } catch (const DataError& e) {
        throw bad(e.what());
    }
    return h;
}

namespace detail {

inline std::ofstream open_for_write(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

inline std::string format_time(double t)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12f", t);
    return buf;
}

}  // namespace detail

inline void write_probability_csv(const fs::path& path, const ProjectionDistribution& p, const MeasurementHeader& meta)
{
    check_shape(p.grid.size(), p.values.size(), "write_probability_csv");
    MeasurementHeader h = meta;
    h.pol = p.pol;
    auto out = detail::open_for_write(path);
    out << format_header(h) << "\nt_ps,value\n";
    for (std::size_t j = 0; j < p.values.size(); ++j) {
        out << detail::format_time(p.grid.t(j)) << ',' << format_double(p.values[j]) << '\n';
    }
}

inline void write_counts_csv(const fs::path& path, const CountRecord& r)
{
    check_shape(r.grid.size(), r.counts.size(), "write_counts_csv");
    auto out = detail::open_for_write(path);
    out << format_header({r.pol, r.exposure_pulses, r.mean_photons_per_pulse, r.detection_efficiency, r.seed})
        << "\nt_ps,value\n";
    for (std::size_t j = 0; j < r.counts.size(); ++j) {
        out << detail::format_time(r.grid.t(j)) << ',' << r.counts[j] << '\n';
    }
}

inline std::string measurement_file_name(Polarization p, bool counts)
{
    return std::string(counts ? "counts_" : "probability_") + to_char(p) + ".csv";
}

inline void write_projection_set(const fs::path& dir, const ProjectionSet& set, const MeasurementHeader& meta)
{
    for (const auto& p : set) write_probability_csv(dir / measurement_file_name(p.pol, false), p, meta);
}

inline void write_count_set(const fs::path& dir, const CountSet& set)
{
    for (const auto& r : set) write_counts_csv(dir / measurement_file_name(r.pol, true), r);
}

struct MeasurementFile {
    fs::path path;
    MeasurementHeader header;
    RVector t;
    std::vector<std::string> values;  // raw text, interpreted by the caller
};

/// Uniform grid from a t column; dt and center are snapped to 1e-12 ps, the
/// resolution of the written column.
inline TimeGrid infer_grid(std::span<const double> t, const std::string& where)
{
    if (t.size() < 2) throw DataError(where + ": need at least 2 rows");
    const double n1 = static_cast<double>(t.size() - 1);
    double dt = (t.back() - t.front()) / n1;
    if (!(dt > 0.0)) throw DataError(where + ": t column must increase");
    for (std::size_t j = 0; j < t.size(); ++j) {
        if (std::abs(t[j] - (t.front() + static_cast<double>(j) * dt)) > 1e-6 * dt) {
            throw DataError(where + ": non-uniform time grid at row " + std::to_string(j + 1));
        }
    }
    auto snap = [](double v) { return std::round(v * 1e12) / 1e12; };
    dt = snap(dt);
    const double center = snap(t.front() + static_cast<double>(t.size() / 2) * dt);
    return TimeGrid(t.size(), dt, center == 0.0 ? 0.0 : center);
}

inline MeasurementFile read_measurement_file(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    const std::string where = path.filename().string();
    MeasurementFile f;
    f.path = path;
    std::string line;
    if (!std::getline(in, line)) throw DataError(where + ": empty file");
    f.header = parse_header(trim(line), where);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(line);
        if (body.empty()) continue;
        if (body == "t_ps,value") continue;
        const auto parts = split(body, ',');
        if (parts.size() != 2) throw DataError(where + " line " + std::to_string(lineno) + ": expected t_ps,value");
        f.t.push_back(parse_double<DataError>(parts[0], where + " line " + std::to_string(lineno)));
        f.values.push_back(parts[1]);
    }
    return f;
}

/// The four D/A/R/L files in `dir`, recognized by their '# pol=' header.
inline std::array<MeasurementFile, 4> read_measurement_dir(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    std::array<std::optional<MeasurementFile>, 4> found;
    for (const auto& p : paths) {
        std::ifstream in(p);
        std::string first;
        std::getline(in, first);
        if (first.rfind("# pol=", 0) != 0) continue;
        MeasurementFile f = read_measurement_file(p);
        auto& slot = found[index_of(f.header.pol)];
        if (slot) {
            throw DataError("two files for polarization " + std::string(1, to_char(f.header.pol)) + ": " +
                            slot->path.filename().string() + ", " + p.filename().string());
        }
        slot = std::move(f);
    }
    std::array<MeasurementFile, 4> out;
    for (auto pol : kPolarizations) {
        auto& slot = found[index_of(pol)];
        if (!slot) throw DataError("missing polarization " + std::string(1, to_char(pol)) + " in " + dir.string());
        out[index_of(pol)] = std::move(*slot);
    }
    const auto& h0 = out[0].header;
    for (const auto& f : out) {
        const auto& h = f.header;
        if (h.exposure_pulses != h0.exposure_pulses || h.mean_photons != h0.mean_photons ||
            h.efficiency != h0.efficiency || h.seed != h0.seed) {
            throw DataError("inconsistent metadata between " + out[0].path.filename().string() + " and " +
                            f.path.filename().string());
        }
        if (f.t.size() != out[0].t.size()) throw DataError("measurement files differ in length");
    }
    return out;
}

inline CountSet ingest_counts(const fs::path& dir)
{
    const auto files = read_measurement_dir(dir);
    const TimeGrid grid = infer_grid(files[0].t, files[0].path.filename().string());
    CountSet out;
    for (auto pol : kPolarizations) {
        const auto& f = files[index_of(pol)];
        const std::string where = f.path.filename().string();
        const TimeGrid g = infer_grid(f.t, where);
        if (!(g == grid)) throw DataError(where + ": time grid differs from the D file");
        std::vector<std::int64_t> counts(f.values.size());
        for (std::size_t j = 0; j < counts.size(); ++j) {
            counts[j] = parse_int<DataError, std::int64_t>(f.values[j], where + " row " + std::to_string(j + 1));
            if (counts[j] < 0) throw DataError(where + ": negative count at row " + std::to_string(j + 1));
        }
        out[index_of(pol)] = {grid, pol, std::move(counts), f.header.exposure_pulses, f.header.mean_photons,
                              f.header.efficiency, f.header.seed};
    }
    return out;
}

inline ProjectionSet ingest_probabilities(const fs::path& dir)
{
    const auto files = read_measurement_dir(dir);
    const TimeGrid grid = infer_grid(files[0].t, files[0].path.filename().string());
    ProjectionSet out;
    for (auto pol : kPolarizations) {
        const auto& f = files[index_of(pol)];
        const std::string where = f.path.filename().string();
        if (!(infer_grid(f.t, where) == grid)) throw DataError(where + ": time grid differs from the D file");
        RVector v(f.values.size());
        for (std::size_t j = 0; j < v.size(); ++j) {
            v[j] = parse_double<DataError>(f.values[j], where + " row " + std::to_string(j + 1));
            if (v[j] < -kNegativeProbabilityTolerance) {
                throw DataError(where + ": negative probability at row " + std::to_string(j + 1));
            }
        }
        out[index_of(pol)] = {grid, pol, std::move(v)};
    }
    return out;
}

/// True when every value column parses as a non-negative integer.
inline bool looks_like_counts(const std::array<MeasurementFile, 4>& files)
{
    for (const auto& f : files) {
        for (const auto& v : f.values) {
            std::int64_t x = 0;
            const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
            if (res.ec != std::errc{} || res.ptr != v.data() + v.size() || x < 0) return false;
        }
    }
    return files[0].header.mean_photons > 0.0 && files[0].header.exposure_pulses > 0;
}

// ---------------------------------------------------------------------------
// Reconstruction outputs

inline void write_reconstruction_csv(const fs::path& path, const Reconstruction& r)
{
    const std::size_t n = r.envelope.grid.size();
    const bool sig = !r.sigma_re.empty();
    auto out = detail::open_for_write(path);
    out << "t_ps,re,im,sigma_re,sigma_im,valid\n";
    for (std::size_t j = 0; j < n; ++j) {
        const cplx a = r.envelope.amplitudes[j];
        out << detail::format_time(r.envelope.grid.t(j)) << ',' << format_double(a.real()) << ','
            << format_double(a.imag()) << ',' << format_double(sig ? r.sigma_re[j] : 0.0) << ','
            << format_double(sig ? r.sigma_im[j] : 0.0) << ',' << (r.mask.valid[j] ? 1 : 0) << '\n';
    }
}

/// Reconstruction read back from its CSV.
struct ReconstructionTable {
    TemporalEnvelope envelope;
    RVector sigma_re;
    RVector sigma_im;
    std::vector<bool> valid;
};

inline ReconstructionTable read_reconstruction_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    const std::string where = path.filename().string();
    std::string line;
    if (!std::getline(in, line) || trim(line) != "t_ps,re,im,sigma_re,sigma_im,valid") {
        throw DataError(where + ": expected header t_ps,re,im,sigma_re,sigma_im,valid");
    }
    RVector t;
    ReconstructionTable tab;
    CVector amp;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto p = split(body, ',');
        const std::string at = where + " line " + std::to_string(lineno);
        if (p.size() != 6) throw DataError(at + ": expected 6 columns");
        t.push_back(parse_double<DataError>(p[0], at));
        amp.emplace_back(parse_double<DataError>(p[1], at), parse_double<DataError>(p[2], at));
        tab.sigma_re.push_back(parse_double<DataError>(p[3], at));
        tab.sigma_im.push_back(parse_double<DataError>(p[4], at));
        if (p[5] != "0" && p[5] != "1") throw DataError(at + ": valid must be 0 or 1");
        tab.valid.push_back(p[5] == "1");
    }
    tab.envelope = {infer_grid(t, where), std::move(amp)};
    return tab;
}

inline void write_spectrum_csv(const fs::path& path, const SpectralWavefunction& s)
{
    auto out = detail::open_for_write(path);
    out << "w_radps,re,im\n";
    for (std::size_t j = 0; j < s.grid.size(); ++j) {
        out << detail::format_time(s.grid.w(j)) << ',' << format_double(s.amplitudes[j].real()) << ','
            << format_double(s.amplitudes[j].imag()) << '\n';
    }
}

inline void write_envelope_csv(const fs::path& path, const TemporalEnvelope& e)
{
    auto out = detail::open_for_write(path);
    out << "t_ps,re,im\n";
    for (std::size_t j = 0; j < e.grid.size(); ++j) {
        out << detail::format_time(e.grid.t(j)) << ',' << format_double(e.amplitudes[j].real()) << ','
            << format_double(e.amplitudes[j].imag()) << '\n';
    }
}

/// Two- or three-column numeric table with a header line; returns columns.
inline std::vector<RVector> read_numeric_csv(const fs::path& path, std::size_t columns)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    const std::string where = path.filename().string();
    std::string line;
    std::getline(in, line);
    std::vector<RVector> cols(columns);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trim(line);
        if (body.empty() || body[0] == '#') continue;
        const auto p = split(body, ',');
        const std::string at = where + " line " + std::to_string(lineno);
        if (p.size() < columns) throw DataError(at + ": expected " + std::to_string(columns) + " columns");
        for (std::size_t c = 0; c < columns; ++c) cols[c].push_back(parse_double<DataError>(p[c], at));
    }
    if (cols[0].size() < 2) throw DataError(where + ": need at least 2 rows");
    return cols;
}

inline SpectralWavefunction read_spectrum_csv(const fs::path& path)
{
    const auto cols = read_numeric_csv(path, 3);
    const TimeGrid g = infer_grid(cols[0], path.filename().string());
    FreqGrid fg{g.n_samples, g.dt, g.t_center};
    CVector a(cols[0].size());
    for (std::size_t j = 0; j < a.size(); ++j) a[j] = {cols[1][j], cols[2][j]};
    return {fg, std::move(a)};
}

struct SweepRow {
    double param = 0.0;
    double estimate = 0.0;
    double stderr_value = 0.0;
};

inline void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows)
{
    auto out = detail::open_for_write(path);
    out << "param,estimate,stderr\n";
    for (const auto& r : rows) {
        out << format_double(r.param) << ',' << format_double(r.estimate) << ',' << format_double(r.stderr_value)
            << '\n';
    }
}

// ---------------------------------------------------------------------------
// JSON records

inline json to_json(const FitReport& r)
{
    json j;
    j["model"] = to_string(r.model);
    j["params"] = r.params;
    j["stderr"] = r.param_stderr;
    j["window_ps"] = {r.window.first, r.window.second};
    j["residual_rms"] = r.residual_rms;
    j["converged"] = r.converged;
    j["points"] = r.points;
    return j;
}

inline json to_json(const FidelityReport& r)
{
    return {{"value", r.value}, {"domain", to_string(r.domain)}, {"bin_count", r.bin_count}, {"clamped", r.clamped}};
}

inline json reconstruction_summary(const Reconstruction& r, const ReconstructedSpectrum* spec = nullptr)
{
    json j;
    j["source"] = r.raw.source == DataSource::counts ? "counts" : "probability";
    j["samples"] = r.envelope.grid.size();
    j["dt_ps"] = r.envelope.grid.dt;
    j["sinc_threshold"] = r.mask.threshold;
    j["valid_samples"] = r.mask.valid_count();
    j["masked_fraction"] = r.mask.masked_fraction();
    j["norm_constant"] = r.norm_constant;
    j["phase_rotation_rad"] = r.phase_rotation;
    if (spec) {
        j["spectrum_samples"] = spec->spectrum.grid.size();
        j["zero_filled_fraction"] = spec->zero_filled_fraction;
    }
    return j;
}

inline void write_json(const fs::path& path, const json& j)
{
    auto out = detail::open_for_write(path);
    out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.filename().string() + ": " + e.what());
    }
}

}  // namespace dmtw
