#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dsol/bohmian.hpp"
#include "dsol/cauchy.hpp"
#include "dsol/errors.hpp"
#include "dsol/fieldsynth.hpp"
#include "dsol/io.hpp"
#include "dsol/verify.hpp"
#include "dsol/version.hpp"
#include "dsol/wavefunction.hpp"
#include "json.hpp"

namespace dsol {

using json = nlohmann::json;

enum ExitCode : int { ExitOk = 0, ExitConfig = 1, ExitVerify = 2, ExitMasking = 3 };

inline const std::vector<std::string>& scenario_ids() {
    static const std::vector<std::string> ids{"rest-wavelet", "boosted-wavelet", "atomic-orbit", "double-slit",
                                              "epr-pair",     "cauchy-demo",     "verify-suite"};
    return ids;
}

namespace detail {
inline json grid_json(const char* ra, double rlo, double rhi, std::size_t rn, const char* ca, double clo, double chi,
                      std::size_t cn, json base = json::array({0.0, 0.0, 0.0, 0.0})) {
    return {{"rows", {{"axis", ra}, {"lo", rlo}, {"hi", rhi}, {"count", rn}}},
            {"cols", {{"axis", ca}, {"lo", clo}, {"hi", chi}, {"count", cn}}},
            {"base", base}};
}
}  // namespace detail

// Full default configuration of a scenario. Every key a user may set appears here.
inline json scenario_defaults(const std::string& id) {
    json c;
    c["scenario"] = id;
    c["seed"] = 1;
    c["mask_budget"] = 1.0;
    c["raster_mapping"] = "asinh";
    if (id == "rest-wavelet") {
        c["g"] = 1.0;
        c["omega0"] = 1.0;
        c["green_kind"] = "antisymmetric";
        c["worldline"] = {{"t_min", -20.0}, {"t_max", 20.0}, {"dt", 0.05}};
        c["grid"] = detail::grid_json("y", -10, 10, 201, "x", -10, 10, 201);
        c["mask_budget"] = 0.0;
    } else if (id == "boosted-wavelet") {
        c["g"] = 1.0;
        c["omega0"] = 1.0;
        c["velocity"] = 0.6;
        c["green_kind"] = "antisymmetric";
        c["worldline"] = {{"t_min", -60.0}, {"t_max", 60.0}, {"dt", 0.05}};
        c["grid"] = detail::grid_json("t", -10, 10, 201, "x", -10, 10, 201);
        c["mask_budget"] = 0.0;
    } else if (id == "atomic-orbit") {
        c["orbit"] = {{"r_n", 5.0},   {"v_n", 0.1},
                      {"L_n", 1.0},   {"chi_n", 1.0},
                      {"theta_n", std::numbers::pi / 2}, {"phi0", 0.0},
                      {"l_max", 40},  {"g", 1.0}};
        c["rotation_check_time"] = 7.0;
        c["grid"] = detail::grid_json("y", -10, 10, 101, "x", -10, 10, 101);
    } else if (id == "double-slit") {
        c["separation"] = 8.0;
        c["sigma0"] = 1.0;
        c["mass"] = 1.0;
        c["velocity"] = 0.0;
        c["g"] = 1.0;
        c["green_kind"] = "antisymmetric";
        c["ensemble"] = {{"size", 200}, {"t_end", 4.0}, {"bins", 64}, {"range", {-16.0, 16.0}}};
        c["integrator"] = {{"atol", 1e-8}, {"rtol", 1e-8}, {"dt_out", 0.01}, {"dt_min", 1e-6}, {"eps_node", 1e-6}};
        c["red_quantile"] = 0.65;
        c["window"] = 5.0;
        c["locking_fraction"] = 0.95;
        c["grid"] = detail::grid_json("t", -5, 5, 400, "x", -2.5, 8.5, 400);
    } else if (id == "epr-pair") {
        c["mass"] = 1.0;
        c["g"] = 1.0;
        c["lattice"] = {{"n", 64}, {"lo", -16.0}, {"hi", 16.0}, {"dt", 0.02}};
        c["particle1"] = {{"mean", -5.0}, {"sigma0", 1.0}, {"velocities", {0.5, -0.5}}};
        c["particle2"] = {{"mean", 5.0}, {"sigma0", 1.0}, {"velocities", {0.6, 0.2}}};
        c["start"] = {-4.6, 5.2};
        c["t_end"] = 3.0;
        c["potential"] = {{"center", 7.0}, {"width2", 0.5}, {"height", 1.0}};
        c["integrator"] = {{"atol", 1e-8}, {"rtol", 1e-8}, {"dt_out", 0.02}, {"dt_min", 1e-6}, {"eps_node", 1e-6}};
        c["green_kind"] = "antisymmetric";
        c["map_window"] = 32.0;
        c["grid"] = detail::grid_json("t", 0, 3, 61, "x", -8, 8, 161);
    } else if (id == "cauchy-demo") {
        c["g"] = 1.0;
        c["omega0"] = 1.0;
        c["source"] = "lienard-wiechert";
        c["t_in"] = 0.0;
        c["points_per_wavelength"] = 16.0;
        c["targets"] = {{"t", 5.0}, {"r_min", 0.0}, {"r_max", 2.0}, {"count", 11}};
        c["quadrature"] = {64, 128};
        c["tolerance"] = 1e-3;
        c["worldline"] = {{"t_min", -30.0}, {"t_max", 30.0}, {"dt", 0.05}};
    } else if (id == "verify-suite") {
        c["dalembert"] = {{"h", {0.02, 0.01, 0.005}}, {"C", 0.05}, {"points", 20}, {"symmetric_ratio", 1e3}};
        c["phase_gradient"] = {{"radius", 1.05}, {"speed", 0.03}, {"omega0", 1.0},
                               {"probe_radius", 0.05}, {"angle_max", 1e-3}};
        c["guidance"] = {{"velocity", 0.3}, {"angle_max", 1e-6}, {"probe_radius", 0.1}};
        c["born"] = {{"size", 2000}, {"bins", 32}, {"t", 4.0}, {"threshold", 0.1}};
        c["cauchy"] = {{"tolerance", 1e-3}, {"radius", 2.0}};
    } else {
        throw ConfigError("unknown scenario '" + id + "'");
    }
    return c;
}

// Overlay user keys on defaults; every user key must already exist with a compatible type.
inline json merge_config(const json& defaults, const json& user, const std::string& path = "") {
    if (!user.is_object()) throw ConfigError("config" + (path.empty() ? "" : " key '" + path + "'") + " must be an object");
    json out = defaults;
    for (auto it = user.begin(); it != user.end(); ++it) {
        std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        const json& d = defaults.at(it.key());
        const json& u = it.value();
        if (d.is_object()) {
            out[it.key()] = merge_config(d, u, key);
            continue;
        }
        bool ok = (d.is_number() && u.is_number()) || (d.is_string() && u.is_string()) ||
                  (d.is_boolean() && u.is_boolean()) || (d.is_array() && u.is_array());
        if (!ok) throw ConfigError("config key '" + key + "' has the wrong type");
        if (d.is_number_integer() && !u.is_number_integer())
            throw ConfigError("config key '" + key + "' must be an integer");
        out[it.key()] = u;
    }
    return out;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::pair<std::size_t, std::size_t>> grid;
};

// scenario id from the user config (or the flag), defaults, user keys, then flag overrides
inline json resolve_config(const std::string& scenario_flag, const json& user, const Overrides& ov) {
    std::string id = scenario_flag;
    if (user.contains("scenario")) {
        if (!user["scenario"].is_string()) throw ConfigError("config key 'scenario' must be a string");
        std::string from_file = user["scenario"].get<std::string>();
        if (!id.empty() && id != from_file)
            throw ConfigError("config key 'scenario' ('" + from_file + "') disagrees with --scenario ('" + id + "')");
        id = from_file;
    }
    if (id.empty()) throw ConfigError("no scenario given (use --scenario or the 'scenario' key)");
    json c = merge_config(scenario_defaults(id), user);
    if (ov.seed) c["seed"] = *ov.seed;
    if (ov.grid) {
        if (!c.contains("grid")) throw ConfigError("scenario '" + id + "' has no grid; --grid does not apply");
        c["grid"]["rows"]["count"] = ov.grid->first;
        c["grid"]["cols"]["count"] = ov.grid->second;
    }
    return c;
}

inline std::pair<std::size_t, std::size_t> parse_grid_flag(const std::string& s) {
    auto x = s.find_first_of("xX");
    if (x == std::string::npos) throw ConfigError("--grid expects NxM, got '" + s + "'");
    try {
        std::size_t a = std::stoul(s.substr(0, x)), b = std::stoul(s.substr(x + 1));
        if (a < 2 || b < 2) throw ConfigError("--grid needs at least 2x2");
        return {a, b};
    } catch (const std::logic_error&) {
        throw ConfigError("--grid expects NxM, got '" + s + "'");
    }
}

namespace detail {

inline Axis axis_from(const json& j, const std::string& key) {
    std::string s = j.get<std::string>();
    if (s == "t") return Axis::T;
    if (s == "x") return Axis::X;
    if (s == "y") return Axis::Y;
    if (s == "z") return Axis::Z;
    throw ConfigError("config key '" + key + "' must be one of t, x, y, z");
}

inline GridSpec grid_from(const json& g) {
    auto axis = [](const json& a, const std::string& name) {
        AxisSpec s;
        s.axis = axis_from(a.at("axis"), "grid." + name + ".axis");
        s.lo = a.at("lo").get<double>();
        s.hi = a.at("hi").get<double>();
        s.count = a.at("count").get<std::size_t>();
        if (s.count < 2 || !(s.hi > s.lo)) throw ConfigError("grid." + name + ": need count >= 2 and hi > lo");
        return s;
    };
    GridSpec spec{axis(g.at("rows"), "rows"), axis(g.at("cols"), "cols"), {}};
    if (spec.rows.axis == spec.cols.axis) throw ConfigError("grid: rows and cols use the same axis");
    const auto& b = g.at("base");
    if (b.size() != 4) throw ConfigError("grid.base must have 4 entries (t, x, y, z)");
    spec.base = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    return spec;
}

inline GreenKind kind_from(const json& c) {
    try {
        return green_kind_from_string(c.at("green_kind").get<std::string>());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config key 'green_kind': ") + e.what());
    }
}

inline RasterMapping mapping_from(const json& c) {
    std::string s = c.at("raster_mapping").get<std::string>();
    if (s == "linear") return RasterMapping::Linear;
    if (s == "asinh") return RasterMapping::Asinh;
    throw ConfigError("config key 'raster_mapping' must be 'linear' or 'asinh'");
}

inline IntegratorConfig integrator_from(const json& j) {
    IntegratorConfig cfg;
    cfg.atol = j.at("atol").get<double>();
    cfg.rtol = j.at("rtol").get<double>();
    cfg.dt_out = j.at("dt_out").get<double>();
    cfg.dt_min = j.at("dt_min").get<double>();
    cfg.eps_node = j.at("eps_node").get<double>();
    if (!(cfg.atol > 0 && cfg.rtol > 0 && cfg.dt_out > 0 && cfg.dt_min > 0))
        throw ConfigError("integrator: tolerances and steps must be positive");
    return cfg;
}

inline double positive(const json& c, const std::string& key) {
    double v = c.at(key).get<double>();
    if (!(v > 0)) throw ConfigError("config key '" + key + "' must be positive");
    return v;
}

// Output directory bookkeeping: every file written is listed with its FNV-1a hash in meta.json.
class Artifacts {
public:
    explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    std::string path(const std::string& rel) {
        auto p = dir_ / rel;
        std::filesystem::create_directories(p.parent_path());
        files_.push_back(rel);
        return p.string();
    }
    void json_file(const std::string& rel, const json& j) {
        auto out = open_output(path(rel));
        out << j.dump(2) << '\n';
    }
    void field(const std::string& stem, const FieldGrid& g, RasterMapping m) {
        write_field_csv(g, path(stem + ".csv"));
        write_field_pgm(g, path(stem + ".pgm"), m);
        files_.push_back(stem + ".pgm.json");
    }
    void cauchy(const std::string& rel, const CauchyData& d) {
        write_cauchy_binary(d, path(rel));
        files_.push_back(rel + ".json");
    }
    json manifest() const {
        json m = json::object();
        for (const auto& f : files_) {
            std::ifstream in(dir_ / f, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            m[f] = hex64(fnv1a64(ss.str()));
        }
        return m;
    }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

inline void write_trajectory_csv(const Trajectory& tr, const std::string& path) {
    auto out = open_output(path);
    out << "lambda,t,x,y,z\n";
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        out << fmt(tr.t[i]) << ',' << fmt(tr.t[i]) << ',' << fmt(tr.x[i]) << ",0,0\n";
}

inline Worldline static_worldline(const json& w) {
    double t0 = w.at("t_min").get<double>(), t1 = w.at("t_max").get<double>(), dt = w.at("dt").get<double>();
    if (!(t1 > t0) || !(dt > 0)) throw ConfigError("worldline: need t_max > t_min and dt > 0");
    auto n = static_cast<std::size_t>(std::llround((t1 - t0) / dt)) + 1;
    return Worldline::from_function(t0, t1, n, [](double t) { return FourVector{t, 0, 0, 0}; });
}

struct RunState {
    const json& config;
    Artifacts& art;
    unsigned threads;
    json report = json::object();
    bool verify_failed = false;
    double masked_fraction = 0.0;
};

inline void note_mask(RunState& st, const FieldGrid& g) {
    double f = static_cast<double>(g.masked()) / static_cast<double>(g.values.size());
    st.masked_fraction = std::max(st.masked_fraction, f);
    st.report["masked_nodes"] = g.masked();
    st.report["masked_fraction"] = f;
    st.report["near_field_nodes"] = g.near_field_nodes;
}

// ---- scenarios ----

inline void run_rest_wavelet(RunState& st) {
    const json& c = st.config;
    double g = positive(c, "g"), om = positive(c, "omega0");
    Worldline w = static_worldline(c.at("worldline"));
    auto law = SourceLaw::harmonic(g, om);
    GridSpec spec = grid_from(c.at("grid"));
    SynthOptions o;
    o.threads = st.threads;
    auto field = synth_field_map(w, law, spec, kind_from(c), o);
    st.art.field("field", field, mapping_from(c));
    note_mask(st, field);
    // peak and its value against g omega0 / 4 pi
    double best = -1, err = 0;
    FourVector at;
    double closed = 0;
    for (std::size_t i = 0; i < spec.rows.count; ++i)
        for (std::size_t j = 0; j < spec.cols.count; ++j) {
            if (field.is_masked(i, j)) continue;
            FourVector x = spec.node(i, j);
            double a = std::abs(field.at(i, j));
            if (a > best) {
                best = a;
                at = x;
            }
            if (kind_from(c) == GreenKind::Antisymmetric)
                closed = std::max(closed, std::abs(field.at(i, j) - stationary_wavelet(g, om, x.t, x.spatial_norm())));
        }
    err = std::abs(best - g * om / four_pi);
    st.report["peak_abs"] = best;
    st.report["peak_at"] = {at.t, at.x, at.y, at.z};
    st.report["expected_peak"] = g * om / four_pi;
    st.report["peak_error"] = err;
    if (kind_from(c) == GreenKind::Antisymmetric) st.report["max_deviation_from_closed_form"] = closed;
}

inline void run_boosted_wavelet(RunState& st) {
    const json& c = st.config;
    double g = positive(c, "g"), om = positive(c, "omega0"), v = c.at("velocity").get<double>();
    if (!(std::abs(v) < 1)) throw ConfigError("config key 'velocity' must satisfy |v| < 1");
    const json& wj = c.at("worldline");
    double t0 = wj.at("t_min").get<double>(), t1 = wj.at("t_max").get<double>(), dt = wj.at("dt").get<double>();
    if (!(t1 > t0) || !(dt > 0)) throw ConfigError("worldline: need t_max > t_min and dt > 0");
    auto n = static_cast<std::size_t>(std::llround((t1 - t0) / dt)) + 1;
    Worldline w = Worldline::from_function(t0, t1, n, [v](double t) { return FourVector{t, v * t, 0, 0}; });
    auto law = SourceLaw::harmonic(g, om);
    GridSpec spec = grid_from(c.at("grid"));
    SynthOptions o;
    o.threads = st.threads;
    GreenKind kind = kind_from(c);
    auto field = synth_field_map(w, law, spec, kind, o);
    st.art.field("field", field, mapping_from(c));
    note_mask(st, field);
    if (kind == GreenKind::Antisymmetric) {
        // nodes inside the near zone use the truncated expansion and are reported apart
        double worst = 0, worst_near = 0, r_near = SynthOptions{}.eps_near_factor / om;
        for (std::size_t i = 0; i < spec.rows.count; ++i)
            for (std::size_t j = 0; j < spec.cols.count; ++j) {
                if (field.is_masked(i, j)) continue;
                FourVector xr = boost(spec.node(i, j), {v, 0, 0});
                double d = std::abs(field.at(i, j) - stationary_wavelet(g, om, xr.t, xr.spatial_norm()));
                double& slot = xr.spatial_norm() < 2 * r_near ? worst_near : worst;
                slot = std::max(slot, d);
            }
        st.report["max_deviation_from_boosted_closed_form"] = worst;
        st.report["max_deviation_near_zone"] = worst_near;
        st.report["near_zone_radius"] = 2 * r_near;
    }
}

inline AtomicOrbitParams orbit_from(const json& o) {
    AtomicOrbitParams p;
    p.r_n = o.at("r_n").get<double>();
    p.v_n = o.at("v_n").get<double>();
    p.L_n = o.at("L_n").get<double>();
    p.chi_n = o.at("chi_n").get<double>();
    p.theta_n = o.at("theta_n").get<double>();
    p.phi0 = o.at("phi0").get<double>();
    p.l_max = o.at("l_max").get<int>();
    p.g = o.at("g").get<double>();
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("orbit: ") + e.what());
    }
    return p;
}

inline void spherical(const FourVector& x, double& r, double& th, double& ph) {
    r = x.spatial_norm();
    th = r > 0 ? std::acos(std::clamp(x.z / r, -1.0, 1.0)) : 0.0;
    ph = std::atan2(x.y, x.x);
}

// max | |u| - |sin(chi s)/(4 pi s)| | over points within `radius` of the source, relative to the motif peak g chi/4pi
inline double atomic_motif_deviation(const AtomicOrbitParams& p, double t, double radius, int n = 400) {
    Vec3 c = p.source_position(t);
    double worst = 0;
    std::mt19937_64 rng(7);
    auto u = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2 - 1; };
    for (int i = 0; i < n; ++i) {
        Vec3 d{u(), u(), u()};
        double dn = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z), s = radius * std::abs(u());
        FourVector x{t, c.x + s * d.x / dn, c.y + s * d.y / dn, c.z + s * d.z / dn};
        double r, th, ph;
        spherical(x, r, th, ph);
        double motif = std::abs(moving_wavelet_approx([&](double) { return c; }, p.g, p.chi_n, t,
                                                      Vec3{x.x, x.y, x.z}));
        worst = std::max(worst, std::abs(std::abs(atomic_series_field(p, t, r, th, ph)) - motif));
    }
    return worst / (p.g * p.chi_n / four_pi);
}

inline void run_atomic_orbit(RunState& st) {
    const json& c = st.config;
    AtomicOrbitParams p = orbit_from(c.at("orbit"));
    GridSpec spec = grid_from(c.at("grid"));
    auto eval = [&](const FourVector& x) {
        double r, th, ph;
        spherical(x, r, th, ph);
        return atomic_series_field(p, x.t, r, th, ph);
    };
    auto field = sample_field_map(spec, eval, st.threads, "atomic series l_max=" + std::to_string(p.l_max));
    st.art.field("field", field, mapping_from(c));
    note_mask(st, field);
    // rigid rotation with the e^{i L t} carrier removed, on a sparse subset of nodes
    double t2 = c.at("rotation_check_time").get<double>(), rot = 0, last = 0;
    for (std::size_t i = 0; i < spec.rows.count; i += 10)
        for (std::size_t j = 0; j < spec.cols.count; j += 10) {
            FourVector x = spec.node(i, j);
            double r, th, ph;
            spherical(x, r, th, ph);
            auto a = atomic_series_terms(p, x.t + t2, r, th, ph);
            cplx b = atomic_series_field(p, x.t, r, th, ph - p.angular_velocity() * t2);
            rot = std::max(rot, std::abs(a.value * std::polar(1.0, -p.L_n * t2) - b));
            last = std::max(last, a.last_term);
        }
    cplx origin = atomic_series_field(p, spec.base.t, 0.0, 0.0, 0.0);
    cplx closed = cplx(0, p.g * std::sqrt(1 - p.v_n * p.v_n)) * std::polar(1.0, p.L_n * spec.base.t) * p.chi_n *
                  (std::sin(p.chi_n * p.r_n) / (p.chi_n * p.r_n)) / four_pi;
    st.report["rotation_residual"] = rot;
    st.report["motif_deviation"] = atomic_motif_deviation(p, spec.base.t, 3.0 / p.chi_n);
    st.report["max_last_term"] = last;
    st.report["origin_error"] = std::abs(origin - closed);
}

inline GaussianSuperposition double_slit_model(const json& c) {
    double sep = c.at("separation").get<double>(), s0 = positive(c, "sigma0"), m = positive(c, "mass");
    double v = c.at("velocity").get<double>();
    return GaussianSuperposition({{1.0, -sep / 2, s0, v}, {1.0, sep / 2, s0, v}}, m);
}

// backward piece reversed, then the forward piece; both start at the same point
inline Trajectory stitch(const Trajectory& b, const Trajectory& f) {
    Trajectory tr;
    tr.z0 = f.z0;
    for (std::size_t i = b.t.size(); i-- > 1;) {
        tr.t.push_back(b.t[i]);
        tr.x.push_back(b.x[i]);
    }
    tr.t.insert(tr.t.end(), f.t.begin(), f.t.end());
    tr.x.insert(tr.x.end(), f.x.begin(), f.x.end());
    tr.status = (f.status == TrajectoryStatus::Completed && b.status == TrajectoryStatus::Completed)
                    ? TrajectoryStatus::Completed
                    : TrajectoryStatus::NodeStalled;
    return tr;
}

inline Trajectory two_sided(const GaussianSuperposition& m, double x0, double window, const IntegratorConfig& cfg) {
    return stitch(integrate_trajectory(m, x0, 0.0, -window, cfg), integrate_trajectory(m, x0, 0.0, window, cfg));
}

inline void run_double_slit(RunState& st) {
    const json& c = st.config;
    auto model = double_slit_model(c);
    IntegratorConfig cfg = integrator_from(c.at("integrator"));
    const json& e = c.at("ensemble");
    auto n = e.at("size").get<std::size_t>();
    double t_end = positive(e, "t_end");
    auto bins = e.at("bins").get<std::size_t>();
    std::pair<double, double> range{e.at("range")[0].get<double>(), e.at("range")[1].get<double>()};
    if (n < 1 || bins < 1 || !(range.second > range.first)) throw ConfigError("ensemble: bad size, bins or range");
    std::uint64_t seed = c.at("seed").get<std::uint64_t>();

    auto x0 = sample_born(model, 0.0, n, seed);
    auto ens = run_ensemble(model, x0, 0.0, t_end, cfg, st.threads, seed, model.hash());
    json index;
    index["seed"] = seed;
    index["model_hash"] = hex64(model.hash());
    index["integrator"] = c.at("integrator");
    json list = json::array();
    for (std::size_t i = 0; i < ens.trajectories.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "trajectories/%05zu.csv", i);
        write_trajectory_csv(ens.trajectories[i], st.art.path(name));
        list.push_back({{"file", name},
                        {"z0", ens.initial[i]},
                        {"status", to_string(ens.trajectories[i].status)},
                        {"rejected_steps", ens.trajectories[i].stats.rejected}});
    }
    index["trajectories"] = list;
    st.art.json_file("trajectories/index.json", index);
    auto born = born_equivariance(model, ens, t_end, bins, range);
    st.report["ensemble_size"] = n;
    st.report["crossings"] = count_crossings(ens);
    st.report["node_stalled"] = ens.node_stalled;
    st.report["born_l1"] = born.max;
    st.report["born_expected_noise_l1"] = born.detail["expected_noise_l1"];

    // selected ("red") trajectory and its field map
    double q = c.at("red_quantile").get<double>();
    if (!(q > 0 && q < 1)) throw ConfigError("config key 'red_quantile' must lie in (0,1)");
    double window = positive(c, "window");
    double xr = BornTable(model, 0.0, model.support(0.0)).quantile(q);
    Trajectory red = two_sided(model, xr, window, cfg);
    write_trajectory_csv(red, st.art.path("red_trajectory.csv"));
    st.report["red_z0"] = xr;
    st.report["red_status"] = to_string(red.status);
    if (red.status != TrajectoryStatus::Completed) throw Error("double-slit: selected trajectory hit a node");
    Worldline w = red.worldline();
    auto law = SourceLaw::harmonic(positive(c, "g"), model.mass());
    GridSpec spec = grid_from(c.at("grid"));
    SynthOptions o;
    o.threads = st.threads;
    auto field = synth_field_map(w, law, spec, kind_from(c), o);
    st.art.field("field", field, mapping_from(c));
    note_mask(st, field);
    if (spec.rows.axis == Axis::T && spec.cols.axis == Axis::X) {
        auto lock = trajectory_locking(field, w);
        double need = c.at("locking_fraction").get<double>();
        st.report["locking_rows"] = lock.rows;
        st.report["locking_fraction"] = lock.fraction;
        st.report["locking_required"] = need;
        double mo = 0;
        for (double d : lock.offset) mo = std::max(mo, std::abs(d));
        st.report["locking_max_offset"] = mo;
        st.report["locking_cell"] = spec.cols.spacing();
    }
}

inline std::vector<GaussianSuperposition> epr_packets(const json& c, const char* key) {
    const json& p = c.at(key);
    double m = positive(c, "mass"), s0 = positive(p, "sigma0");
    std::vector<GaussianSuperposition> out;
    for (const auto& v : p.at("velocities"))
        out.push_back(GaussianSuperposition({{1.0, p.at("mean").get<double>(), s0, v.get<double>()}}, m));
    if (out.size() != 2) throw ConfigError(std::string("config key '") + key + ".velocities' needs two entries");
    return out;
}

inline GridWavefunction2D epr_state(const json& c, bool entangled, bool potential) {
    const json& L = c.at("lattice");
    auto n = L.at("n").get<std::size_t>();
    Grid1D g = Grid1D::periodic(L.at("lo").get<double>(), L.at("hi").get<double>(), n);
    double m = positive(c, "mass");
    auto p1 = epr_packets(c, "particle1"), p2 = epr_packets(c, "particle2");
    GridWavefunction2D w{g, std::vector<cplx>(n * n), 0.0, m, {}};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double x1 = g.x(i), x2 = g.x(j);
            cplx v = p1[0].eval(0, x1) * p2[0].eval(0, x2);
            if (entangled) v += p1[1].eval(0, x1) * p2[1].eval(0, x2);
            w.psi[i * n + j] = v;
        }
    if (potential) {
        const json& P = c.at("potential");
        double x0 = P.at("center").get<double>(), w2 = positive(P, "width2"), h = P.at("height").get<double>();
        w.V.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) w.V[i * n + j] = h * std::exp(-std::pow(g.x(j) - x0, 2) / w2);
    }
    return w;
}

inline void run_epr_pair(RunState& st) {
    const json& c = st.config;
    IntegratorConfig cfg = integrator_from(c.at("integrator"));
    double dtg = positive(c.at("lattice"), "dt"), t_end = positive(c, "t_end");
    double z1 = c.at("start")[0].get<double>(), z2 = c.at("start")[1].get<double>();
    json runs = json::object();
    std::pair<Trajectory, Trajectory> ent_off;
    double d_ent = 0, d_prod = 0;
    for (bool entangled : {true, false}) {
        std::pair<Trajectory, Trajectory> res[2];
        for (int pot = 0; pot < 2; ++pot) {
            GridGuidance2D gg(epr_state(c, entangled, pot == 1), dtg, st.threads);
            res[pot] = integrate_many_body(gg, z1, z2, 0.0, t_end, cfg);
            std::string stem = std::string(entangled ? "entangled" : "product") + (pot ? "_potential_on" : "_potential_off");
            write_trajectory_csv(res[pot].first, st.art.path(stem + "_particle1.csv"));
            write_trajectory_csv(res[pot].second, st.art.path(stem + "_particle2.csv"));
            runs[stem] = {{"particle1_status", to_string(res[pot].first.status)},
                          {"particle2_status", to_string(res[pot].second.status)},
                          {"particle1_end", res[pot].first.x.back()},
                          {"particle2_end", res[pot].second.x.back()}};
        }
        double d = 0;
        std::size_t k = std::min(res[0].first.x.size(), res[1].first.x.size());
        for (std::size_t i = 0; i < k; ++i) d = std::max(d, std::abs(res[0].first.x[i] - res[1].first.x[i]));
        (entangled ? d_ent : d_prod) = d;
        if (entangled) ent_off = res[0];
    }
    st.report["runs"] = runs;
    st.report["particle1_shift_entangled"] = d_ent;
    st.report["particle1_shift_product"] = d_prod;
    st.report["tolerance"] = cfg.atol;

    // Field map of the entangled pair (potential off). The lattice run covers only [0, t_end], too short for
    // both light cones of every node, so the worldlines come from the analytic free state over a wider window.
    double W = positive(c, "map_window");
    auto p1 = epr_packets(c, "particle1"), p2 = epr_packets(c, "particle2");
    ProductSum2 free_state(p1, p2);
    auto fw = integrate_two_body(free_state, z1, z2, 0.0, t_end + W, cfg);
    auto bw = integrate_two_body(free_state, z1, z2, 0.0, -W, cfg);
    Trajectory a1 = stitch(bw.first, fw.first), a2 = stitch(bw.second, fw.second);
    if (a1.status != TrajectoryStatus::Completed || a2.status != TrajectoryStatus::Completed)
        throw Error("epr-pair: analytic map trajectory hit a node");
    double agree = 0;
    for (std::size_t i = 0; i < ent_off.first.t.size(); ++i) {
        double t = ent_off.first.t[i];
        auto j = static_cast<std::size_t>(std::llround((t + W) / cfg.dt_out));
        if (j < a1.t.size() && std::abs(a1.t[j] - t) < 1e-9)
            agree = std::max({agree, std::abs(a1.x[j] - ent_off.first.x[i]), std::abs(a2.x[j] - ent_off.second.x[i])});
    }
    st.report["lattice_vs_analytic_max"] = agree;
    write_trajectory_csv(a1, st.art.path("map_particle1.csv"));
    write_trajectory_csv(a2, st.art.path("map_particle2.csv"));
    Worldline w1 = a1.worldline(), w2 = a2.worldline();
    double g = positive(c, "g"), m = positive(c, "mass");
    FieldSource src[2] = {{&w1, SourceLaw::harmonic(g, m)}, {&w2, SourceLaw::harmonic(g, m)}};
    SynthOptions o;
    o.threads = st.threads;
    auto field = synth_field_map(std::span<const FieldSource>(src, 2), grid_from(c.at("grid")), kind_from(c), o);
    st.art.field("field", field, mapping_from(c));
    note_mask(st, field);
}

inline void run_cauchy_demo(RunState& st) {
    const json& c = st.config;
    double g = positive(c, "g"), om = positive(c, "omega0"), t_in = c.at("t_in").get<double>();
    double ppw = positive(c, "points_per_wavelength");
    const json& tg = c.at("targets");
    double tt = tg.at("t").get<double>(), r0 = tg.at("r_min").get<double>(), r1 = tg.at("r_max").get<double>();
    auto nt = tg.at("count").get<std::size_t>();
    if (!(tt > t_in) || nt < 1 || r1 < r0) throw ConfigError("targets: need t > t_in, count >= 1, r_max >= r_min");
    int qt = c.at("quadrature")[0].get<int>(), qp = c.at("quadrature")[1].get<int>();
    double lambda0 = 2 * std::numbers::pi / om, h = lambda0 / ppw;
    double R = tt - t_in;
    Box3 box = Box3::centred({0, 0, 0}, R + std::max(std::abs(r0), std::abs(r1)) + 4 * h, h);
    std::string source = c.at("source").get<std::string>();
    std::optional<Worldline> w;
    auto law = SourceLaw::harmonic(g, om);
    FieldEvaluator f;
    if (source == "lienard-wiechert") {
        w = static_worldline(c.at("worldline"));
        f = [&](const FourVector& x) { return antisymmetric_field(*w, law, x).value; };
    } else if (source == "closed-form") {
        f = [&](const FourVector& x) { return stationary_wavelet(g, om, x.t, x.spatial_norm()); };
    } else {
        throw ConfigError("config key 'source' must be 'lienard-wiechert' or 'closed-form'");
    }
    auto data = record_cauchy_data(f, t_in, box, lambda0, st.threads, source + " static source g=" + fmt(g) + " omega0=" + fmt(om));
    st.art.cauchy("cauchy.bin", data);
    std::vector<FourVector> xs(nt);
    for (std::size_t i = 0; i < nt; ++i)
        xs[i] = {tt, nt > 1 ? r0 + (r1 - r0) * static_cast<double>(i) / static_cast<double>(nt - 1) : r0, 0, 0};
    auto rec = kirchhoff_reconstruct(data, xs, qt, qp, st.threads);
    auto out = open_output(st.art.path("reconstruction.csv"));
    out << "t,r,re,im,ref_re,ref_im,rel_err\n";
    double worst = 0;
    for (std::size_t i = 0; i < nt; ++i) {
        cplx ref = stationary_wavelet(g, om, xs[i].t, xs[i].x);
        double e = std::abs(rec[i] - ref) / std::abs(ref);
        worst = std::max(worst, e);
        out << fmt(xs[i].t) << ',' << fmt(xs[i].x) << ',' << fmt(rec[i].real()) << ',' << fmt(rec[i].imag()) << ','
            << fmt(ref.real()) << ',' << fmt(ref.imag()) << ',' << fmt(e) << '\n';
    }
    CauchyData zero = data;
    std::fill(zero.u.begin(), zero.u.end(), cplx(0.0));
    std::fill(zero.dtu.begin(), zero.dtu.end(), cplx(0.0));
    double zmax = 0;
    for (const auto& v : kirchhoff_reconstruct(zero, xs, qt, qp, st.threads)) zmax = std::max(zmax, std::abs(v));
    double tol = positive(c, "tolerance");
    st.report["box"] = cauchy_sidecar(data)["box"];
    st.report["warnings"] = data.warnings;
    st.report["max_relative_error"] = worst;
    st.report["tolerance"] = tol;
    st.report["zero_data_max"] = zmax;
    st.report["pass"] = worst < tol && zmax == 0.0;
}

inline void run_verify_suite(RunState& st) {
    const json& c = st.config;
    json reports = json::array();
    auto add = [&](const ResidualReport& r) {
        reports.push_back(r.to_json());
        if (!r.pass) st.verify_failed = true;
    };
    {
        const json& d = c.at("dalembert");
        auto hs = d.at("h").get<std::vector<double>>();
        double C = positive(d, "C");
        auto np = d.at("points").get<std::size_t>();
        auto law = SourceLaw::harmonic(1.0, 1.0);
        std::mt19937_64 rng(c.at("seed").get<std::uint64_t>());
        auto u = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2 - 1; };
        for (double v : {0.0, 0.6}) {
            Worldline w = Worldline::from_function(-40, 40, 801, [v](double t) { return FourVector{t, v * t, 0, 0}; });
            FieldEvaluator f = [&](const FourVector& x) { return antisymmetric_field(w, law, x, 0.0).value; };
            std::vector<FourVector> pts;
            for (std::size_t i = 0; i < np; ++i) {
                double r = i % 2 ? 0.06 + 0.04 * std::abs(u()) : 0.1 + 3 * std::abs(u());
                Vec3 dir{u(), u(), u()};
                double nn = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
                pts.push_back(boost(FourVector{2 * u(), r * dir.x / nn, r * dir.y / nn, r * dir.z / nn}, {-v, 0, 0}));
            }
            add(dalembert_study(v == 0 ? "dalembert_static" : "dalembert_uniform_0.6", f, pts, hs, C));
        }
        // negative control: the symmetric combination diverges at the source
        Worldline w = Worldline::from_function(-40, 40, 801, [](double t) { return FourVector{t, 0, 0, 0}; });
        FieldEvaluator a = [&](const FourVector& x) { return antisymmetric_field(w, law, x, 0.0).value; };
        FieldEvaluator s = [&](const FourVector& x) { return lw_field(w, law, x, GreenKind::Symmetric); };
        FourVector x{3, 0.01, 0, 0};
        double ra = dalembert_residual(a, x, 0.005), rs = dalembert_residual(s, x, 0.005);
        ResidualReport r;
        r.name = "dalembert_symmetric_control";
        r.negative_control = true;
        r.points = 1;
        r.max = r.mean = rs;
        r.threshold = d.at("symmetric_ratio").get<double>() * ra;
        r.pass = rs > r.threshold;
        r.detail = {{"antisymmetric_residual", ra}, {"symmetric_residual", rs}};
        add(r);
    }
    {
        const json& p = c.at("phase_gradient");
        double R = positive(p, "radius"), v = positive(p, "speed"), om = positive(p, "omega0");
        double W = v / R;
        Worldline w = Worldline::from_function(-60, 60, 24001, [=](double t) {
            return FourVector{t, R * std::cos(W * t), R * std::sin(W * t), 0};
        });
        add(phase_gradient_study(w, SourceLaw::harmonic(1.0, om), {-5, -1, 0, 2, 4}, positive(p, "probe_radius"),
                                 positive(p, "angle_max")));
    }
    {
        const json& gj = c.at("guidance");
        double v = gj.at("velocity").get<double>();
        Worldline w = Worldline::from_function(-40, 40, 801, [v](double t) { return FourVector{t, v * t, 0, 0}; });
        auto law = SourceLaw::harmonic(1.0, 1.0);
        FieldEvaluator f = [&](const FourVector& x) { return antisymmetric_field(w, law, x, 0.0).value; };
        Worldline other = Worldline::from_function(-40, 40, 801, [](double t) { return FourVector{t, -0.2 * t + 0.5, 0, 0}; });
        std::vector<double> lams{-3, -1, 0, 1, 3};
        double r = positive(gj, "probe_radius"), amax = positive(gj, "angle_max");
        add(guidance_consistency(w, f, lams, r, amax));
        add(guidance_consistency(other, f, lams, r, amax, true));
    }
    {
        const json& b = c.at("born");
        GaussianSuperposition g({{1.0, 0.0, 1.0, 0.0}}, 1.0);
        auto n = b.at("size").get<std::size_t>();
        double t = positive(b, "t");
        std::uint64_t seed = c.at("seed").get<std::uint64_t>();
        IntegratorConfig cfg;
        cfg.dt_out = t / 8;
        auto ens = run_ensemble(g, sample_born(g, 0.0, n, seed), 0.0, t, cfg, st.threads, seed, g.hash());
        add(born_equivariance(g, ens, t, b.at("bins").get<std::size_t>(), g.support(t, 6),
                              positive(b, "threshold")));
    }
    {
        const json& cj = c.at("cauchy");
        double R = positive(cj, "radius"), h = 2 * std::numbers::pi / 16;
        auto f = [](const FourVector& x) { return stationary_wavelet(1, 1, x.t, x.spatial_norm()); };
        auto data = record_cauchy_data(f, 0.0, Box3::centred({1, 0, 0}, R + 4 * h, h), 2 * std::numbers::pi, st.threads);
        FourVector x{R, 1.0, 0, 0};
        ResidualReport r;
        r.name = "cauchy_reconstruction";
        r.points = 1;
        r.max = r.mean = std::abs(kirchhoff_reconstruct(data, x) - f(x)) / std::abs(f(x));
        r.threshold = positive(cj, "tolerance");
        r.pass = r.max < r.threshold;
        add(r);
    }
    st.art.json_file("reports.json", reports);
    std::size_t failed = 0;
    for (const auto& r : reports) failed += r["pass"].get<bool>() ? 0 : 1;
    st.report["checks"] = reports.size();
    st.report["failed"] = failed;
}

}  // namespace detail

struct RunOutcome {
    int exit_code = ExitOk;
    json report;
};

// Runs a resolved configuration into out_dir. Thread count is an execution detail: it is not written to any
// artifact, so outputs are byte-identical across thread counts.
inline RunOutcome run_scenario(const json& resolved, const std::string& out_dir, unsigned threads = 1) {
    const std::string id = resolved.at("scenario").get<std::string>();
    detail::Artifacts art(out_dir);
    art.json_file("config.resolved.json", resolved);
    detail::RunState st{resolved, art, std::max(1u, threads)};
    try {
        if (id == "rest-wavelet") detail::run_rest_wavelet(st);
        else if (id == "boosted-wavelet") detail::run_boosted_wavelet(st);
        else if (id == "atomic-orbit") detail::run_atomic_orbit(st);
        else if (id == "double-slit") detail::run_double_slit(st);
        else if (id == "epr-pair") detail::run_epr_pair(st);
        else if (id == "cauchy-demo") detail::run_cauchy_demo(st);
        else if (id == "verify-suite") detail::run_verify_suite(st);
        else throw ConfigError("unknown scenario '" + id + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunOutcome out;
    double budget = resolved.at("mask_budget").get<double>();
    if (st.verify_failed) out.exit_code = ExitVerify;
    else if (st.masked_fraction > budget) out.exit_code = ExitMasking;
    st.report["mask_budget"] = budget;
    st.report["exit_code"] = out.exit_code;
    art.json_file("report.json", st.report);
    json meta;
    meta["scenario"] = id;
    meta["seed"] = resolved.at("seed");
    meta["config_hash"] = hex64(fnv1a64(resolved.dump()));
    meta["version"] = version;
    meta["outputs"] = art.manifest();
    auto m = open_output((art.dir() / "meta.json").string());
    m << meta.dump(2) << '\n';
    out.report = st.report;
    return out;
}

}  // namespace dsol
