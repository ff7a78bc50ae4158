#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsol/errors.hpp"
#include "dsol/greens.hpp"
#include "dsol/io.hpp"
#include "dsol/parallel.hpp"
#include "dsol/spacetime.hpp"
#include "dsol/special.hpp"

namespace dsol {

using cplx = std::complex<double>;
inline constexpr double four_pi = 4.0 * std::numbers::pi;

// i g sin(w r)/(4 pi r) e^{-i w t}
inline cplx stationary_wavelet(double g, double omega0, double t, double r) {
    if (r < 0) throw InvalidArgument("stationary_wavelet: r must be >= 0");
    double shape = r == 0.0 ? omega0 : std::sin(omega0 * r) / r;
    return cplx(0.0, g * shape / four_pi) * std::polar(1.0, -omega0 * t);
}

// What to do when a light cone of the field point leaves the sampled worldline.
enum class ConeExit {
    Mask,    // raise WorldlineTooShort
    Vanish,  // the source exists only on the sampled segment; missing intersections contribute 0
};

struct LwOptions {
    double eps_rho = 1e-6;
    ConeExit cone_exit = ConeExit::Mask;
};

namespace detail {
inline cplx lw_term(const Worldline& w, const SourceLaw& law, const FourVector& x, GreenKind kind,
                    const LwOptions& opt, double* rho_out = nullptr, double* lambda_out = nullptr) {
    LightconeSolution s;
    try {
        s = lightcone_intersect(w, x, kind);
    } catch (const WorldlineTooShort&) {
        if (opt.cone_exit == ConeExit::Vanish) return 0.0;
        throw;
    }
    if (rho_out) *rho_out = s.rho;
    if (lambda_out) *lambda_out = s.lambda;
    double wgt = green_weight(s, opt.eps_rho);
    return law.g(s.tau) * std::polar(1.0, law.S(s.tau)) * wgt;
}
}  // namespace detail

// Kind combination of g e^{iS}/(4 pi rho) at the retarded and advanced intersections.
inline cplx lw_field(const Worldline& w, const SourceLaw& law, const FourVector& x, GreenKind kind,
                     const LwOptions& opt = {}) {
    switch (kind) {
        case GreenKind::Retarded:
        case GreenKind::Advanced: return detail::lw_term(w, law, x, kind, opt);
        case GreenKind::Antisymmetric:
            return 0.5 * (detail::lw_term(w, law, x, GreenKind::Retarded, opt) -
                          detail::lw_term(w, law, x, GreenKind::Advanced, opt));
        case GreenKind::Symmetric:
            return 0.5 * (detail::lw_term(w, law, x, GreenKind::Retarded, opt) +
                          detail::lw_term(w, law, x, GreenKind::Advanced, opt));
    }
    return 0.0;
}

namespace detail {
inline cplx near_field_at_lambda(const Worldline& w, const SourceLaw& law, double lam, const FourVector& xi) {
    KinematicDerivatives d = w.derivatives(lam);
    double tol = 1e-9 * (1.0 + xi.euclidean_norm() * d.zdot.euclidean_norm());
    if (std::abs(minkowski_dot(xi, d.zdot)) > tol)
        throw GeometryError("near_field_expansion: xi is not on the rest-frame hyperplane (xi.zdot = " +
                            fmt(minkowski_dot(xi, d.zdot)) + ")");
    double tau = w.proper_time(lam);
    double g = law.g(tau), gd = law.g_dot(tau), sd = law.S_dot(tau);
    cplx pre = cplx(0.0, g / four_pi) * std::polar(1.0, law.S(tau));
    cplx bracket = -cplx(sd, -gd / g) * (1.0 + minkowski_dot(xi, d.zddot)) +
                   cplx(0.0, 1.0 / 3.0) * minkowski_dot(xi, d.zdddot);
    return pre * bracket;
}
}  // namespace detail

// (i g e^{iS}/4pi) [-(Sdot - i gdot/g)(1 + xi.zddot) + (i/3) xi.zdddot] at proper time tau.
inline cplx near_field_expansion(const Worldline& w, const SourceLaw& law, double tau, const FourVector& xi) {
    return detail::near_field_at_lambda(w, law, w.lambda_at_proper_time(tau), xi);
}

struct AntisymmetricValue {
    cplx value;
    bool near_field = false;
};

// Antisymmetric field, replaced by the near-field expansion when rho_ret < eps_near_factor/|Sdot|.
inline AntisymmetricValue antisymmetric_field(const Worldline& w, const SourceLaw& law, const FourVector& x,
                                              double eps_near_factor = 0.05, const LwOptions& opt = {}) {
    LightconeSolution ret;
    try {
        ret = lightcone_intersect(w, x, GreenKind::Retarded);
    } catch (const WorldlineTooShort&) {
        if (opt.cone_exit == ConeExit::Vanish) return {lw_field(w, law, x, GreenKind::Antisymmetric, opt), false};
        throw;
    }
    double sd = std::abs(law.S_dot(ret.tau));
    double eps_near = sd > 0 ? eps_near_factor / sd : 0.0;
    if (ret.rho >= eps_near) return {lw_field(w, law, x, GreenKind::Antisymmetric, opt), false};
    auto adv = lightcone_intersect(w, x, GreenKind::Advanced);
    // (x - z(lambda)).zdot(lambda) falls from +rho_ret to -rho_adv between the two intersections
    auto h = [&](double lam) { return minkowski_dot(x - w.position(lam), w.four_velocity(lam)); };
    double a = ret.lambda, b = adv.lambda;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
        double m = 0.5 * (a + b);
        (h(m) > 0.0 ? a : b) = m;
    }
    double lam = 0.5 * (a + b);
    // project with the same stencil velocity the expansion uses; the spline tangent differs at O(h^4)
    FourVector u = w.derivatives(lam).zdot;
    u = u / std::sqrt(minkowski_dot(u, u));
    FourVector xi = x - w.position(lam);
    xi -= u * minkowski_dot(xi, u);
    return {detail::near_field_at_lambda(w, law, lam, xi), true};
}

// i g sin(w |r - r0(t)|)/(4 pi |r - r0(t)|) e^{-i w t}
inline cplx moving_wavelet_approx(const std::function<Vec3(double)>& center, double g, double omega0, double t,
                                  const Vec3& r) {
    Vec3 c = center(t);
    double d = std::sqrt((r.x - c.x) * (r.x - c.x) + (r.y - c.y) * (r.y - c.y) + (r.z - c.z) * (r.z - c.z));
    return stationary_wavelet(g, omega0, t, d);
}

struct AtomicOrbitParams {
    double r_n = 5.0;
    double v_n = 0.1;
    double L_n = 1.0;
    double chi_n = 1.0;
    double theta_n = std::numbers::pi / 2;
    double phi0 = 0.0;
    int l_max = 40;
    double g = 1.0;

    void validate() const {
        if (!(v_n > 0 && v_n < 1)) throw InvalidArgument("AtomicOrbitParams: need 0 < v_n < 1");
        if (!(chi_n > 0)) throw InvalidArgument("AtomicOrbitParams: need chi_n > 0");
        if (!(r_n > 0)) throw InvalidArgument("AtomicOrbitParams: need r_n > 0");
        if (l_max < 1) throw InvalidArgument("AtomicOrbitParams: need l_max >= 1");
    }
    double angular_velocity() const { return v_n / (r_n * std::sin(theta_n)); }
    double phi_at(double t) const { return phi0 + angular_velocity() * t; }
    Vec3 source_position(double t) const {
        double s = std::sin(theta_n), ph = phi_at(t);
        return {r_n * s * std::cos(ph), r_n * s * std::sin(ph), r_n * std::cos(theta_n)};
    }
};

struct AtomicSeriesValue {
    cplx value;
    double last_term;  // magnitude of the l = l_max contribution
};

inline AtomicSeriesValue atomic_series_terms(const AtomicOrbitParams& p, double t, double r, double theta,
                                             double phi) {
    p.validate();
    auto jr = spherical_bessel_j_all(p.l_max, p.chi_n * r);
    auto jn = spherical_bessel_j_all(p.l_max, p.chi_n * p.r_n);
    SphericalHarmonicTable yx(p.l_max, theta, phi), ys(p.l_max, p.theta_n, p.phi_at(t));
    cplx pre = cplx(0.0, p.g * std::sqrt(1.0 - p.v_n * p.v_n)) * std::polar(1.0, p.L_n * t);
    cplx sum = 0.0, last = 0.0;
    for (int l = 0; l <= p.l_max; ++l) {
        cplx ang = 0.0;
        for (int m = -l; m <= l; ++m) ang += yx(l, m) * std::conj(ys(l, m));
        cplx term = p.chi_n * jr[l] * jn[l] * ang;
        sum += term;
        if (l == p.l_max) last = term;
    }
    return {pre * sum, std::abs(pre * last)};
}

inline cplx atomic_series_field(const AtomicOrbitParams& p, double t, double r, double theta, double phi) {
    return atomic_series_terms(p, t, r, theta, phi).value;
}

enum class Axis { T, X, Y, Z };

inline const char* to_string(Axis a) {
    switch (a) {
        case Axis::T: return "t";
        case Axis::X: return "x";
        case Axis::Y: return "y";
        case Axis::Z: return "z";
    }
    return "?";
}

struct AxisSpec {
    Axis axis = Axis::X;
    double lo = 0, hi = 1;
    std::size_t count = 1;
    double coord(std::size_t i) const {
        if (count <= 1) return lo;
        return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    double spacing() const { return count > 1 ? (hi - lo) / static_cast<double>(count - 1) : 0.0; }
};

// rows x cols map; coordinates not on either axis come from base
struct GridSpec {
    AxisSpec rows, cols;
    FourVector base;

    FourVector node(std::size_t i, std::size_t j) const {
        FourVector x = base;
        x[static_cast<int>(rows.axis)] = rows.coord(i);
        x[static_cast<int>(cols.axis)] = cols.coord(j);
        return x;
    }
    std::size_t size() const { return rows.count * cols.count; }
};

struct FieldGrid {
    GridSpec spec;
    std::vector<cplx> values;        // row-major, masked entries hold 0
    std::vector<std::uint8_t> mask;  // 1 = outside the domain (cone exit or singular point)
    std::string worldline_hash;
    std::string kind;
    std::string law;
    std::size_t near_field_nodes = 0;

    std::size_t masked() const { return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1)); }
    cplx at(std::size_t i, std::size_t j) const { return values[i * spec.cols.count + j]; }
    bool is_masked(std::size_t i, std::size_t j) const { return mask[i * spec.cols.count + j] != 0; }
};

struct FieldSource {
    const Worldline* worldline;
    SourceLaw law;
};

struct SynthOptions {
    unsigned threads = 1;
    double eps_near_factor = 0.05;
    bool near_field = true;
    LwOptions lw;
};

// Sum of the field of every source at each node; a node is masked if any source cannot be evaluated there.
inline FieldGrid synth_field_map(std::span<const FieldSource> sources, const GridSpec& spec, GreenKind kind,
                                 const SynthOptions& opt = {}) {
    FieldGrid g;
    g.spec = spec;
    g.values.assign(spec.size(), 0.0);
    g.mask.assign(spec.size(), 0);
    std::vector<std::uint8_t> near(spec.size(), 0);
    parallel_for(spec.size(), opt.threads, [&](std::size_t k) {
        FourVector x = spec.node(k / spec.cols.count, k % spec.cols.count);
        cplx sum = 0.0;
        try {
            for (const auto& s : sources) {
                if (kind == GreenKind::Antisymmetric && opt.near_field) {
                    auto v = antisymmetric_field(*s.worldline, s.law, x, opt.eps_near_factor, opt.lw);
                    sum += v.value;
                    if (v.near_field) near[k] = 1;
                } else {
                    sum += lw_field(*s.worldline, s.law, x, kind, opt.lw);
                }
            }
            g.values[k] = sum;
        } catch (const WorldlineTooShort&) {
            g.mask[k] = 1;
        } catch (const NearSingularity&) {
            g.mask[k] = 1;
        } catch (const StencilError&) {
            g.mask[k] = 1;
        } catch (const RangeError&) {
            g.mask[k] = 1;
        }
    });
    g.near_field_nodes = static_cast<std::size_t>(std::count(near.begin(), near.end(), 1));
    std::string hashes, laws;
    for (const auto& s : sources) {
        hashes += (hashes.empty() ? "" : "+") + hex64(s.worldline->hash());
        laws += (laws.empty() ? "" : "; ") + s.law.description;
    }
    g.worldline_hash = hashes;
    g.kind = to_string(kind);
    g.law = laws;
    return g;
}

inline FieldGrid synth_field_map(const Worldline& w, const SourceLaw& law, const GridSpec& spec, GreenKind kind,
                                 const SynthOptions& opt = {}) {
    FieldSource s{&w, law};
    return synth_field_map(std::span<const FieldSource>(&s, 1), spec, kind, opt);
}

// Any pointwise evaluator (closed forms, series); exceptions of type Error mask the node.
inline FieldGrid sample_field_map(const GridSpec& spec, const std::function<cplx(const FourVector&)>& f,
                                  unsigned threads, std::string provenance) {
    FieldGrid g;
    g.spec = spec;
    g.values.assign(spec.size(), 0.0);
    g.mask.assign(spec.size(), 0);
    parallel_for(spec.size(), threads, [&](std::size_t k) {
        try {
            g.values[k] = f(spec.node(k / spec.cols.count, k % spec.cols.count));
        } catch (const Error&) {
            g.mask[k] = 1;
        }
    });
    g.worldline_hash = "none";
    g.kind = "closed-form";
    g.law = std::move(provenance);
    return g;
}

inline nlohmann::json grid_spec_json(const GridSpec& s) {
    auto axis = [](const AxisSpec& a) {
        return nlohmann::json{{"axis", to_string(a.axis)}, {"lo", a.lo}, {"hi", a.hi}, {"count", a.count}};
    };
    return {{"rows", axis(s.rows)},
            {"cols", axis(s.cols)},
            {"base", {s.base.t, s.base.x, s.base.y, s.base.z}}};
}

// Header "axis1,axis2,re,im"; masked nodes are written as nan.
inline void write_field_csv(const FieldGrid& g, const std::string& path) {
    auto out = open_output(path);
    out << "axis1,axis2,re,im\n";
    for (std::size_t i = 0; i < g.spec.rows.count; ++i)
        for (std::size_t j = 0; j < g.spec.cols.count; ++j) {
            std::size_t k = i * g.spec.cols.count + j;
            bool m = g.mask[k] != 0;
            out << fmt(g.spec.rows.coord(i)) << ',' << fmt(g.spec.cols.coord(j)) << ','
                << (m ? "nan" : fmt(g.values[k].real())) << ',' << (m ? "nan" : fmt(g.values[k].imag())) << '\n';
        }
}

enum class RasterMapping { Linear, Asinh };

// 8-bit PGM of Re(u); top row is the largest axis1 coordinate; masked nodes are black.
// linear: 127.5 (1 + Re u / max|Re u|)
// asinh:  127.5 (1 + asinh(Re u / s) / asinh(max|Re u| / s)), s = median |Re u| (display only)
inline void write_field_pgm(const FieldGrid& g, const std::string& path, RasterMapping mapping) {
    std::vector<double> mags;
    double vmax = 0.0;
    for (std::size_t k = 0; k < g.values.size(); ++k)
        if (!g.mask[k]) {
            double a = std::abs(g.values[k].real());
            vmax = std::max(vmax, a);
            if (a > 0) mags.push_back(a);
        }
    double s = 1.0;
    if (!mags.empty()) {
        std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2), mags.end());
        s = mags[mags.size() / 2];
    }
    auto level = [&](double v) {
        if (vmax == 0.0) return 128;
        double u = mapping == RasterMapping::Linear ? v / vmax : std::asinh(v / s) / std::asinh(vmax / s);
        return static_cast<int>(std::lround(127.5 * (1.0 + std::clamp(u, -1.0, 1.0))));
    };
    const std::size_t rows = g.spec.rows.count, cols = g.spec.cols.count;
    auto out = open_output(path, true);
    out << "P5\n" << cols << ' ' << rows << "\n255\n";
    std::vector<unsigned char> line(cols);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t i = rows - 1 - r;
        for (std::size_t j = 0; j < cols; ++j) {
            std::size_t k = i * cols + j;
            line[j] = g.mask[k] ? 0 : static_cast<unsigned char>(level(g.values[k].real()));
        }
        out.write(reinterpret_cast<const char*>(line.data()), static_cast<std::streamsize>(cols));
    }
    nlohmann::json side;
    side["grid"] = grid_spec_json(g.spec);
    side["mapping"] = mapping == RasterMapping::Linear ? "linear" : "asinh";
    side["mapping_formula"] = mapping == RasterMapping::Linear
                                  ? "127.5*(1+Re(u)/max|Re(u)|)"
                                  : "127.5*(1+asinh(Re(u)/s)/asinh(max|Re(u)|/s)), s=median|Re(u)|";
    side["max_abs_re"] = vmax;
    side["asinh_scale"] = s;
    side["masked_pixel"] = 0;
    side["top_row"] = "largest axis1";
    side["worldline_hash"] = g.worldline_hash;
    side["green_kind"] = g.kind;
    side["source_law"] = g.law;
    side["mask_count"] = g.masked();
    auto js = open_output(path + ".json");
    js << side.dump(2) << '\n';
}

}  // namespace dsol
