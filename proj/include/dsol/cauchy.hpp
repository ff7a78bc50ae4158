#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "dsol/errors.hpp"
#include "dsol/fft.hpp"
#include "dsol/io.hpp"
#include "dsol/parallel.hpp"
#include "dsol/quadrature.hpp"
#include "dsol/spacetime.hpp"
#include "json.hpp"

namespace dsol {

// Uniform 3D box of nodes origin + h*(i,j,k).
struct Box3 {
    Vec3 origin;
    double h = 1.0;
    std::size_t nx = 0, ny = 0, nz = 0;

    std::size_t size() const { return nx * ny * nz; }
    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * ny + j) * nz + k; }
    Vec3 node(std::size_t i, std::size_t j, std::size_t k) const {
        return {origin.x + h * static_cast<double>(i), origin.y + h * static_cast<double>(j),
                origin.z + h * static_cast<double>(k)};
    }
    Vec3 upper() const {
        return {origin.x + h * static_cast<double>(nx - 1), origin.y + h * static_cast<double>(ny - 1),
                origin.z + h * static_cast<double>(nz - 1)};
    }
    // cube centred on c with half-width at least `half`
    static Box3 centred(const Vec3& c, double half, double h) {
        std::size_t m = static_cast<std::size_t>(std::ceil(half / h));
        std::size_t n = 2 * m + 1;
        double o = static_cast<double>(m) * h;
        return {{c.x - o, c.y - o, c.z - o}, h, n, n, n};
    }
};

struct CauchyData {
    double t_in = 0.0;
    Box3 box;
    std::vector<cplx> u;
    std::vector<cplx> dtu;
    std::vector<std::uint8_t> mask;
    std::string provenance;
    std::vector<std::string> warnings;
    std::string source_hash;

    std::size_t masked() const {
        std::size_t c = 0;
        for (auto m : mask) c += m;
        return c;
    }
};

// The time derivative uses the 5-point centred stencil with delta = h/4.
// Evaluator exceptions derived from dsol::Error mark the node as masked.
inline CauchyData record_cauchy_data(const std::function<cplx(const FourVector&)>& field, double t_in, const Box3& box,
                                     double wavelength, unsigned threads = 1, std::string provenance = "") {
    if (box.size() == 0 || !(box.h > 0)) throw InvalidArgument("record_cauchy_data: empty box");
    CauchyData d;
    d.t_in = t_in;
    d.box = box;
    d.u.assign(box.size(), 0.0);
    d.dtu.assign(box.size(), 0.0);
    d.mask.assign(box.size(), 0);
    d.provenance = std::move(provenance);
    const double delta = box.h / 4;
    parallel_for(box.size(), threads, [&](std::size_t n) {
        std::size_t k = n % box.nz, j = (n / box.nz) % box.ny, i = n / (box.nz * box.ny);
        Vec3 p = box.node(i, j, k);
        try {
            auto at = [&](double dt) { return field({t_in + dt, p.x, p.y, p.z}); };
            d.u[n] = at(0.0);
            d.dtu[n] = (at(-2 * delta) - 8.0 * at(-delta) + 8.0 * at(delta) - at(2 * delta)) / (12 * delta);
        } catch (const Error&) {
            d.u[n] = d.dtu[n] = 0.0;
            d.mask[n] = 1;
        }
    });
    if (wavelength / box.h < 8.0)
        d.warnings.push_back("coarse grid: " + fmt(wavelength / box.h) + " points per wavelength (< 8)");
    if (d.masked() > 0) d.warnings.push_back("masked nodes: " + std::to_string(d.masked()));
    Fnv1a hh;
    hh.update(d.provenance);
    hh.update(t_in);
    for (const auto& v : d.u) {
        hh.update(v.real());
        hh.update(v.imag());
    }
    d.source_hash = hex64(hh.digest());
    return d;
}

namespace detail {
// 6-point Lagrange weights and derivative weights on offsets -2..3 at local coordinate s in [0,1).
inline void lagrange6(double s, std::array<double, 6>& w, std::array<double, 6>& dw) {
    for (int k = 0; k < 6; ++k) {
        double ok = k - 2, den = 1.0, num = 1.0, dsum = 0.0;
        for (int j = 0; j < 6; ++j) {
            if (j == k) continue;
            den *= ok - (j - 2);
            num *= s - (j - 2);
        }
        for (int m = 0; m < 6; ++m) {
            if (m == k) continue;
            double p = 1.0;
            for (int j = 0; j < 6; ++j)
                if (j != k && j != m) p *= s - (j - 2);
            dsum += p;
        }
        w[k] = num / den;
        dw[k] = dsum / den;
    }
}

struct Interp {
    cplx u, dtu;
    std::array<cplx, 3> grad;
};

inline bool stencil_base(double p, double o, double h, std::size_t n, std::size_t& base, double& s) {
    double q = (p - o) / h;
    double f = std::floor(q);
    if (f - 2 < 0 || f + 3 > static_cast<double>(n) - 1) return false;
    base = static_cast<std::size_t>(f) - 2;
    s = q - f;
    return true;
}

inline Interp interpolate(const CauchyData& d, const Vec3& p, bool& ok) {
    const Box3& b = d.box;
    std::size_t bi, bj, bk;
    double si, sj, sk;
    ok = stencil_base(p.x, b.origin.x, b.h, b.nx, bi, si) && stencil_base(p.y, b.origin.y, b.h, b.ny, bj, sj) &&
         stencil_base(p.z, b.origin.z, b.h, b.nz, bk, sk);
    Interp r{};
    if (!ok) return r;
    std::array<double, 6> wx, wy, wz, dx, dy, dz;
    lagrange6(si, wx, dx);
    lagrange6(sj, wy, dy);
    lagrange6(sk, wz, dz);
    for (int a = 0; a < 6; ++a)
        for (int c = 0; c < 6; ++c)
            for (int e = 0; e < 6; ++e) {
                std::size_t n = b.index(bi + a, bj + c, bk + e);
                if (d.mask[n]) throw DomainError("kirchhoff_reconstruct: sphere touches masked Cauchy data");
                const cplx v = d.u[n];
                r.u += wx[a] * wy[c] * wz[e] * v;
                r.dtu += wx[a] * wy[c] * wz[e] * d.dtu[n];
                r.grad[0] += dx[a] * wy[c] * wz[e] * v;
                r.grad[1] += wx[a] * dy[c] * wz[e] * v;
                r.grad[2] += wx[a] * wy[c] * dz[e] * v;
            }
    for (auto& g : r.grad) g /= b.h;
    return r;
}
}  // namespace detail

// Spherical-means form of the retarded reconstruction on the sphere of radius R = x.t - t_in:
// u = <u0> + R <d_n u0> + R <u1>.
inline cplx kirchhoff_reconstruct(const CauchyData& d, const FourVector& x, int n_theta = 64, int n_phi = 128) {
    const double R = x.t - d.t_in;
    if (!(R >= 0)) throw InvalidArgument("kirchhoff_reconstruct: target must lie after t_in");
    if (n_theta < 1 || n_phi < 1) throw InvalidArgument("kirchhoff_reconstruct: quadrature order");
    bool ok = true;
    if (R == 0.0) {
        auto r = detail::interpolate(d, {x.x, x.y, x.z}, ok);
        if (ok) return r.u;
    }
    const double need = R + 3 * d.box.h;
    auto domain_error = [&] {
        Vec3 lo{x.x - need, x.y - need, x.z - need}, hi{x.x + need, x.y + need, x.z + need};
        return DomainError("kirchhoff_reconstruct: sphere leaves the data box; need [" + fmt(lo.x) + "," +
                           fmt(hi.x) + "]x[" + fmt(lo.y) + "," + fmt(hi.y) + "]x[" + fmt(lo.z) + "," +
                           fmt(hi.z) + "]");
    };
    if (!ok) throw domain_error();
    auto gl = gauss_legendre(static_cast<std::size_t>(n_theta));
    const double dphi = 2 * std::numbers::pi / n_phi;
    cplx acc = 0.0;
    for (int a = 0; a < n_theta; ++a) {
        double ct = gl.nodes[a], st = std::sqrt(std::max(0.0, 1 - ct * ct));
        cplx ring = 0.0;
        for (int b = 0; b < n_phi; ++b) {
            double ph = dphi * b;
            Vec3 n{st * std::cos(ph), st * std::sin(ph), ct};
            auto r = detail::interpolate(d, {x.x + R * n.x, x.y + R * n.y, x.z + R * n.z}, ok);
            if (!ok) throw domain_error();
            cplx dn = r.grad[0] * n.x + r.grad[1] * n.y + r.grad[2] * n.z;
            ring += r.u + R * dn + R * r.dtu;
        }
        acc += gl.weights[a] * ring;
    }
    return acc * dphi / (4 * std::numbers::pi);
}

inline std::vector<cplx> kirchhoff_reconstruct(const CauchyData& d, const std::vector<FourVector>& xs, int n_theta,
                                               int n_phi, unsigned threads) {
    std::vector<cplx> out(xs.size());
    parallel_for(xs.size(), threads, [&](std::size_t i) { out[i] = kirchhoff_reconstruct(d, xs[i], n_theta, n_phi); });
    return out;
}

inline nlohmann::json cauchy_sidecar(const CauchyData& d) {
    nlohmann::json j;
    j["format"] = "complex128 little-endian (re, im): u[n] then dtu[n], n = (i*ny + j)*nz + k; then n mask bytes";
    j["t_in"] = d.t_in;
    j["box"] = {{"origin", {d.box.origin.x, d.box.origin.y, d.box.origin.z}},
                {"h", d.box.h},
                {"n", {d.box.nx, d.box.ny, d.box.nz}}};
    j["provenance"] = d.provenance;
    j["source_hash"] = d.source_hash;
    j["warnings"] = d.warnings;
    j["masked"] = d.masked();
    return j;
}

inline void write_cauchy_binary(const CauchyData& d, const std::string& path) {
    auto out = open_output(path, true);
    auto put = [&](const std::vector<cplx>& a) {
        for (const auto& v : a) {
            double re = v.real(), im = v.imag();
            out.write(reinterpret_cast<const char*>(&re), 8);
            out.write(reinterpret_cast<const char*>(&im), 8);
        }
    };
    put(d.u);
    put(d.dtu);
    out.write(reinterpret_cast<const char*>(d.mask.data()), static_cast<std::streamsize>(d.mask.size()));
    auto js = open_output(path + ".json");
    js << cauchy_sidecar(d).dump(2) << '\n';
}

inline CauchyData read_cauchy_binary(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw Error("cannot open sidecar " + path + ".json");
    auto j = nlohmann::json::parse(js);
    CauchyData d;
    d.t_in = j.at("t_in").get<double>();
    const auto& b = j.at("box");
    d.box.origin = {b.at("origin")[0].get<double>(), b.at("origin")[1].get<double>(), b.at("origin")[2].get<double>()};
    d.box.h = b.at("h").get<double>();
    d.box.nx = b.at("n")[0].get<std::size_t>();
    d.box.ny = b.at("n")[1].get<std::size_t>();
    d.box.nz = b.at("n")[2].get<std::size_t>();
    d.provenance = j.at("provenance").get<std::string>();
    d.source_hash = j.at("source_hash").get<std::string>();
    d.warnings = j.at("warnings").get<std::vector<std::string>>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    auto get = [&](std::vector<cplx>& a) {
        a.resize(d.box.size());
        for (auto& v : a) {
            double re, im;
            in.read(reinterpret_cast<char*>(&re), 8);
            in.read(reinterpret_cast<char*>(&im), 8);
            v = {re, im};
        }
    };
    get(d.u);
    get(d.dtu);
    d.mask.resize(d.box.size());
    in.read(reinterpret_cast<char*>(d.mask.data()), static_cast<std::streamsize>(d.mask.size()));
    if (!in) throw Error("Cauchy data truncated: " + path);
    return d;
}

}  // namespace dsol
