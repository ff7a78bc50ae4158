#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsol/errors.hpp"
#include "dsol/fft.hpp"
#include "dsol/io.hpp"
#include "dsol/parallel.hpp"
#include "dsol/spacetime.hpp"

namespace dsol {

// psi, d psi/dx, d^2 psi/dx^2 at one point.
struct PsiJet {
    cplx psi, dpsi, d2psi;
};

struct GaussianComponent {
    cplx weight;
    double mean;
    double sigma0;
    double velocity;
};

// Free evolution of a weighted sum of normalised 1D Gaussians; the rest-mass phase is excluded.
class GaussianSuperposition {
public:
    GaussianSuperposition(std::vector<GaussianComponent> comps, double mass) : c_(std::move(comps)), m_(mass) {
        if (c_.empty()) throw InvalidArgument("GaussianSuperposition: no components");
        if (!(mass > 0)) throw InvalidArgument("GaussianSuperposition: mass must be positive");
        for (const auto& c : c_)
            if (!(c.sigma0 > 0)) throw InvalidArgument("GaussianSuperposition: sigma0 must be positive");
        norm_ = 0.0;
        for (const auto& a : c_)
            for (const auto& b : c_) norm_ += (std::conj(a.weight) * b.weight * overlap0(a, b)).real();
        scale_ = 1.0 / std::sqrt(norm_);
    }

    // Two equal packets at +-separation/2 at rest.
    static GaussianSuperposition double_slit(double separation = 8.0, double sigma0 = 1.0, double mass = 1.0) {
        return GaussianSuperposition({{1.0, -0.5 * separation, sigma0, 0.0}, {1.0, 0.5 * separation, sigma0, 0.0}},
                                     mass);
    }

    double mass() const { return m_; }
    double norm() const { return norm_; }
    const std::vector<GaussianComponent>& components() const { return c_; }

    cplx eval(double t, double x) const { return jet(t, x).psi; }

    PsiJet jet(double t, double x) const {
        PsiJet j{0.0, 0.0, 0.0};
        for (const auto& c : c_) {
            double a0 = 1.0 / (4.0 * c.sigma0 * c.sigma0);
            cplx a = a0 / (1.0 + cplx(0.0, 2.0 * a0 * t / m_));
            double k = m_ * c.velocity;
            double d = x - c.mean - c.velocity * t;
            cplx q = -a * d * d + cplx(0.0, k * (x - c.mean) - 0.5 * k * k * t / m_);
            cplx pre = std::pow(2.0 * std::numbers::pi * c.sigma0 * c.sigma0, -0.25) * std::sqrt(a / a0);
            cplx psi = c.weight * pre * std::exp(q);
            cplx q1 = -2.0 * a * d + cplx(0.0, k);
            cplx q2 = -2.0 * a;
            j.psi += psi;
            j.dpsi += q1 * psi;
            j.d2psi += (q2 + q1 * q1) * psi;
        }
        j.psi *= scale_;
        j.dpsi *= scale_;
        j.d2psi *= scale_;
        return j;
    }

    // d psi/dt from the free Schroedinger equation
    cplx dpsi_dt(double t, double x) const { return cplx(0.0, 0.5 / m_) * jet(t, x).d2psi; }

    // Upper bound on max_x |psi(t,x)|, used for relative node thresholds.
    double amplitude_bound(double t) const {
        double s = 0.0;
        for (const auto& c : c_) {
            double st = c.sigma0 * std::sqrt(1.0 + std::pow(t / (2.0 * m_ * c.sigma0 * c.sigma0), 2));
            s += std::abs(c.weight) * std::pow(2.0 * std::numbers::pi * st * st, -0.25);
        }
        return s * scale_;
    }

    // Interval holding all components to nsigma widths at time t.
    std::pair<double, double> support(double t, double nsigma = 12.0) const {
        double lo = 1e300, hi = -1e300;
        for (const auto& c : c_) {
            double st = c.sigma0 * std::sqrt(1.0 + std::pow(t / (2.0 * m_ * c.sigma0 * c.sigma0), 2));
            double mu = c.mean + c.velocity * t;
            lo = std::min(lo, mu - nsigma * st);
            hi = std::max(hi, mu + nsigma * st);
        }
        return {lo, hi};
    }

    std::uint64_t hash() const {
        Fnv1a h;
        h.update(m_);
        for (const auto& c : c_) {
            h.update(c.weight.real());
            h.update(c.weight.imag());
            h.update(c.mean);
            h.update(c.sigma0);
            h.update(c.velocity);
        }
        return h.digest();
    }

private:
    // <a|b> at t = 0 for unweighted normalised components
    cplx overlap0(const GaussianComponent& a, const GaussianComponent& b) const {
        double aa = 1.0 / (4.0 * a.sigma0 * a.sigma0), ab = 1.0 / (4.0 * b.sigma0 * b.sigma0);
        double ka = m_ * a.velocity, kb = m_ * b.velocity;
        double alpha = aa + ab;
        cplx beta(2.0 * aa * a.mean + 2.0 * ab * b.mean, kb - ka);
        cplx gamma(-aa * a.mean * a.mean - ab * b.mean * b.mean, ka * a.mean - kb * b.mean);
        double na = std::pow(2.0 * std::numbers::pi * a.sigma0 * a.sigma0, -0.25);
        double nb = std::pow(2.0 * std::numbers::pi * b.sigma0 * b.sigma0, -0.25);
        return na * nb * std::sqrt(std::numbers::pi / alpha) * std::exp(beta * beta / (4.0 * alpha) + gamma);
    }

    std::vector<GaussianComponent> c_;
    double m_;
    double norm_ = 1.0, scale_ = 1.0;
};

struct Grid1D {
    double x0 = 0;
    double dx = 1;
    std::size_t n = 0;

    double x(std::size_t i) const { return x0 + dx * static_cast<double>(i); }
    double length() const { return dx * static_cast<double>(n); }

    static Grid1D periodic(double lo, double hi, std::size_t n) {
        if (!is_power_of_two(n)) throw ConfigError("grid size must be a power of two, got " + std::to_string(n));
        if (!(hi > lo)) throw ConfigError("grid domain must have hi > lo");
        return {lo, (hi - lo) / static_cast<double>(n), n};
    }
};

// Periodic 1D lattice wavefunction.
struct GridWavefunction1D {
    Grid1D grid;
    std::vector<cplx> psi;
    double t = 0;
    double mass = 1;
    std::vector<double> V;  // empty means V = 0

    double norm() const {
        double s = 0.0;
        for (const auto& v : psi) s += std::norm(v);
        return s * grid.dx;
    }
};

inline GridWavefunction1D sample_on_grid(const GaussianSuperposition& model, double t, const Grid1D& g,
                                         std::vector<double> V = {}) {
    GridWavefunction1D w{g, std::vector<cplx>(g.n), t, model.mass(), std::move(V)};
    for (std::size_t i = 0; i < g.n; ++i) w.psi[i] = model.eval(t, g.x(i));
    return w;
}

namespace detail {
inline void check_split_step(const Grid1D& g, double mass, const std::vector<double>& V, double dt) {
    double vmax = 0.0;
    for (double v : V) vmax = std::max(vmax, std::abs(v));
    if (vmax * std::abs(dt) >= 0.1)
        throw ConfigError("split_step: max|V|*dt = " + fmt(vmax * std::abs(dt)) + " must be < 0.1");
    double kmax = std::numbers::pi / g.dx;
    double phase = kmax * kmax * std::abs(dt) / (2.0 * mass);
    if (phase >= std::numbers::pi)
        throw ConfigError("split_step: Nyquist kinetic phase per step " + fmt(phase) + " must be < pi (dt < " +
                          fmt(2.0 * mass * std::numbers::pi / (kmax * kmax)) + ")");
}
}  // namespace detail

// Strang splitting V/2, T, V/2 with the transform done by Fft.
inline GridWavefunction1D split_step_propagate(const GridWavefunction1D& w, double dt, std::size_t steps) {
    detail::check_split_step(w.grid, w.mass, w.V, dt);
    Fft fft(w.grid.n);
    auto k = fft.wavenumbers(w.grid.dx);
    std::vector<cplx> kin(w.grid.n), pot;
    for (std::size_t j = 0; j < w.grid.n; ++j) kin[j] = std::polar(1.0, -k[j] * k[j] * dt / (2.0 * w.mass));
    if (!w.V.empty()) {
        pot.resize(w.grid.n);
        for (std::size_t j = 0; j < w.grid.n; ++j) pot[j] = std::polar(1.0, -0.5 * w.V[j] * dt);
    }
    GridWavefunction1D out = w;
    auto& a = out.psi;
    for (std::size_t s = 0; s < steps; ++s) {
        if (!pot.empty())
            for (std::size_t j = 0; j < a.size(); ++j) a[j] *= pot[j];
        fft.forward(a);
        for (std::size_t j = 0; j < a.size(); ++j) a[j] *= kin[j];
        fft.inverse(a);
        if (!pot.empty())
            for (std::size_t j = 0; j < a.size(); ++j) a[j] *= pot[j];
    }
    out.t = w.t + dt * static_cast<double>(steps);
    return out;
}

// Spectral first and second derivatives of a periodic 1D lattice function.
inline std::pair<std::vector<cplx>, std::vector<cplx>> spectral_derivatives(const Grid1D& g,
                                                                            const std::vector<cplx>& f) {
    Fft fft(g.n);
    auto k = fft.wavenumbers(g.dx);
    std::vector<cplx> hat = f;
    fft.forward(hat);
    std::vector<cplx> d1(g.n), d2(g.n);
    for (std::size_t j = 0; j < g.n; ++j) {
        // drop the unpaired Nyquist mode from the odd derivative
        double kj = (j == g.n / 2) ? 0.0 : k[j];
        d1[j] = cplx(0.0, kj) * hat[j];
        d2[j] = -k[j] * k[j] * hat[j];
    }
    fft.inverse(d1);
    fft.inverse(d2);
    return {std::move(d1), std::move(d2)};
}

// Two particles of equal mass on an n x n periodic configuration-space lattice; psi[i1*n + i2].
struct GridWavefunction2D {
    Grid1D axis;
    std::vector<cplx> psi;
    double t = 0;
    double mass = 1;
    std::vector<double> V;  // n*n or empty

    double norm() const {
        double s = 0.0;
        for (const auto& v : psi) s += std::norm(v);
        return s * axis.dx * axis.dx;
    }
    std::size_t n() const { return axis.n; }
};

namespace detail {
inline void fft2(const Fft& fft, std::vector<cplx>& a, std::size_t n, bool inverse, unsigned threads) {
    parallel_for(n, threads, [&](std::size_t r) {
        cplx* row = a.data() + r * n;
        inverse ? fft.inverse(row) : fft.forward(row);
    });
    parallel_for(n, threads, [&](std::size_t c) {
        std::vector<cplx> col(n);
        for (std::size_t r = 0; r < n; ++r) col[r] = a[r * n + c];
        inverse ? fft.inverse(col) : fft.forward(col);
        for (std::size_t r = 0; r < n; ++r) a[r * n + c] = col[r];
    });
}
}  // namespace detail

class SplitStep2D {
public:
    SplitStep2D(const Grid1D& axis, double mass, const std::vector<double>& V, double dt, unsigned threads = 1)
        : n_(axis.n), fft_(axis.n), threads_(threads), dt_(dt) {
        detail::check_split_step(axis, 0.5 * mass, V, dt);  // |k|^2 = k1^2 + k2^2 doubles the Nyquist phase
        auto k = fft_.wavenumbers(axis.dx);
        kin_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                kin_[i * n_ + j] = std::polar(1.0, -(k[i] * k[i] + k[j] * k[j]) * dt / (2.0 * mass));
        if (!V.empty()) {
            if (V.size() != n_ * n_) throw InvalidArgument("SplitStep2D: potential size mismatch");
            pot_.resize(n_ * n_);
            for (std::size_t i = 0; i < n_ * n_; ++i) pot_[i] = std::polar(1.0, -0.5 * V[i] * dt);
        }
    }

    void step(std::vector<cplx>& a) const {
        if (!pot_.empty())
            for (std::size_t i = 0; i < a.size(); ++i) a[i] *= pot_[i];
        detail::fft2(fft_, a, n_, false, threads_);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] *= kin_[i];
        detail::fft2(fft_, a, n_, true, threads_);
        if (!pot_.empty())
            for (std::size_t i = 0; i < a.size(); ++i) a[i] *= pot_[i];
    }
    double dt() const { return dt_; }

private:
    std::size_t n_;
    Fft fft_;
    unsigned threads_;
    double dt_;
    std::vector<cplx> kin_, pot_;
};

inline GridWavefunction2D split_step_propagate(const GridWavefunction2D& w, double dt, std::size_t steps,
                                               unsigned threads = 1) {
    SplitStep2D op(w.axis, w.mass, w.V, dt, threads);
    GridWavefunction2D out = w;
    for (std::size_t s = 0; s < steps; ++s) op.step(out.psi);
    out.t = w.t + dt * static_cast<double>(steps);
    return out;
}

// Polar data at a point. gradS and lapR_over_R are along x; relativistic entries are set
// only by models that know the time dependence.
struct PolarFields {
    double R = 0;
    double S = 0;
    double gradS = 0;
    double lapR_over_R = 0;
    double mass = 1;
    std::optional<FourVector> dS;  // covariant components d_mu S
    std::optional<double> boxR_over_R;
};

inline constexpr double default_eps_node = 1e-12;

inline PolarFields polar_from_jet(const PsiJet& j, double mass, double eps_node = default_eps_node) {
    double R = std::abs(j.psi);
    if (R < eps_node) throw NodeError("polar_decompose: |psi| below node threshold", R);
    cplx l1 = j.dpsi / j.psi, l2 = j.d2psi / j.psi;
    PolarFields f;
    f.R = R;
    f.S = std::arg(j.psi);
    f.gradS = l1.imag();
    f.lapR_over_R = l2.real() + f.gradS * f.gradS;
    f.mass = mass;
    return f;
}

inline PolarFields polar_decompose(const GaussianSuperposition& m, double t, double x,
                                   double eps_node = default_eps_node) {
    return polar_from_jet(m.jet(t, x), m.mass(), eps_node);
}

namespace detail {
inline double wrap_pi(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a;
}
// Unwrap principal phases in ascending position order, anchored at the smallest position,
// so a path and its reverse give identical values.
inline void unwrap_by_position(std::vector<PolarFields>& f, const std::vector<double>& xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& prev = f[order[k - 1]];
        auto& cur = f[order[k]];
        cur.S = prev.S + wrap_pi(cur.S - prev.S);
    }
}
}  // namespace detail

inline std::vector<PolarFields> polar_decompose_path(const GaussianSuperposition& m, double t,
                                                     const std::vector<double>& xs,
                                                     double eps_node = default_eps_node) {
    std::vector<PolarFields> f;
    f.reserve(xs.size());
    for (double x : xs) f.push_back(polar_decompose(m, t, x, eps_node));
    detail::unwrap_by_position(f, xs);
    return f;
}

// All lattice nodes, spectral derivatives.
inline std::vector<PolarFields> polar_decompose(const GridWavefunction1D& w, double eps_node = default_eps_node) {
    auto [d1, d2] = spectral_derivatives(w.grid, w.psi);
    std::vector<PolarFields> f(w.grid.n);
    std::vector<double> xs(w.grid.n);
    for (std::size_t i = 0; i < w.grid.n; ++i) {
        f[i] = polar_from_jet({w.psi[i], d1[i], d2[i]}, w.mass, eps_node);
        xs[i] = w.grid.x(i);
    }
    detail::unwrap_by_position(f, xs);
    return f;
}

// Relativistic: box R / R. Non-relativistic: -lap R / (2 m R).
inline double quantum_potential(const PolarFields& f, bool relativistic) {
    if (!relativistic) return -f.lapR_over_R / (2.0 * f.mass);
    if (!f.boxR_over_R) throw InvalidArgument("quantum_potential: relativistic form needs time derivatives");
    return *f.boxR_over_R;
}

inline double varying_mass(const PolarFields& f) {
    double q = quantum_potential(f, true);
    double m2 = f.mass * f.mass + q;
    if (!(m2 > 0)) throw SuperluminalRegime("varying_mass: m^2 + Q = " + fmt(m2) + " is not positive");
    return std::sqrt(m2);
}

// J^mu = -R^2 (d^mu S + e A^mu)/m with A given by contravariant components.
// Without covariant phase data the non-relativistic limit R^2 [1, v] is returned.
inline FourVector probability_current(const PolarFields& f, const FourVector& A = {}, double e = 0.0) {
    double r2 = f.R * f.R;
    if (f.dS) {
        FourVector up = flip_index(*f.dS) + A * e;
        return up * (-r2 / f.mass);
    }
    double v = (f.gradS - e * A.x) / f.mass;
    return {r2, r2 * v, 0.0, 0.0};
}

// max over nodes of |d_t rho + d_x J| using centred differences in t (one step either way) and x.
inline double continuity_residual(const GridWavefunction1D& w, double dt) {
    auto fwd = split_step_propagate(w, dt, 1);
    auto bwd = split_step_propagate(w, -dt, 1);
    auto d1 = spectral_derivatives(w.grid, w.psi).first;
    const std::size_t n = w.grid.n;
    std::vector<double> J(n);
    for (std::size_t i = 0; i < n; ++i) J[i] = (std::conj(w.psi[i]) * d1[i]).imag() / w.mass;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double drho = (std::norm(fwd.psi[i]) - std::norm(bwd.psi[i])) / (2.0 * dt);
        double dJ = (J[(i + 1) % n] - J[(i + n - 1) % n]) / (2.0 * w.grid.dx);
        worst = std::max(worst, std::abs(drho + dJ));
    }
    return worst;
}

// Sum of Klein-Gordon plane waves c_j exp(i(k_j x - E_j t)), E_j = sqrt(m^2 + k_j^2), along x.
class KleinGordonPlaneWaves {
public:
    struct Mode {
        cplx amplitude;
        double k;
    };
    KleinGordonPlaneWaves(std::vector<Mode> modes, double mass) : modes_(std::move(modes)), m_(mass) {
        if (modes_.empty()) throw InvalidArgument("KleinGordonPlaneWaves: no modes");
    }
    double mass() const { return m_; }

    struct Jet {
        cplx psi;
        cplx d[2];      // d_t, d_x
        cplx dd[2][2];  // second partials
    };

    Jet jet(double t, double x) const {
        Jet j{};
        for (const auto& md : modes_) {
            double E = std::sqrt(m_ * m_ + md.k * md.k);
            cplx v = md.amplitude * std::polar(1.0, md.k * x - E * t);
            cplx p[2] = {cplx(0.0, -E), cplx(0.0, md.k)};
            j.psi += v;
            for (int a = 0; a < 2; ++a) {
                j.d[a] += p[a] * v;
                for (int b = 0; b < 2; ++b) j.dd[a][b] += p[a] * p[b] * v;
            }
        }
        return j;
    }

    PolarFields polar(double t, double x, double eps_node = default_eps_node) const {
        Jet j = jet(t, x);
        double R = std::abs(j.psi);
        if (R < eps_node) throw NodeError("polar_decompose: |psi| below node threshold", R);
        cplx lt = j.d[0] / j.psi, lx = j.d[1] / j.psi;
        cplx ltt = j.dd[0][0] / j.psi, lxx = j.dd[1][1] / j.psi;
        PolarFields f;
        f.R = R;
        f.S = std::arg(j.psi);
        f.gradS = lx.imag();
        f.lapR_over_R = lxx.real() + lx.imag() * lx.imag();
        f.mass = m_;
        f.dS = FourVector{lt.imag(), lx.imag(), 0.0, 0.0};
        double dS2 = lt.imag() * lt.imag() - lx.imag() * lx.imag();
        f.boxR_over_R = (ltt - lxx).real() + dS2;
        return f;
    }

private:
    std::vector<Mode> modes_;
    double m_;
};

// Snapshot formats: 1D CSV "x,re,im"; 2D little-endian row-major (re, im) float64 pairs + JSON sidecar.
inline void write_snapshot_csv(const GridWavefunction1D& w, const std::string& path) {
    auto out = open_output(path);
    out << "x,re,im\n";
    for (std::size_t i = 0; i < w.grid.n; ++i)
        out << fmt(w.grid.x(i)) << ',' << fmt(w.psi[i].real()) << ',' << fmt(w.psi[i].imag()) << '\n';
}

inline void write_snapshot_binary(const GridWavefunction2D& w, const std::string& path) {
    auto out = open_output(path, true);
    for (const auto& v : w.psi) {
        double re = v.real(), im = v.imag();
        out.write(reinterpret_cast<const char*>(&re), 8);
        out.write(reinterpret_cast<const char*>(&im), 8);
    }
    nlohmann::json side;
    side["format"] = "complex128 row-major, index i1*n+i2, little-endian (re, im)";
    side["n"] = w.axis.n;
    side["x0"] = w.axis.x0;
    side["dx"] = w.axis.dx;
    side["t"] = w.t;
    side["mass"] = w.mass;
    auto js = open_output(path + ".json");
    js << side.dump(2) << '\n';
}

inline GridWavefunction2D read_snapshot_binary(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw Error("cannot open sidecar " + path + ".json");
    auto side = nlohmann::json::parse(js);
    GridWavefunction2D w;
    w.axis = {side.at("x0").get<double>(), side.at("dx").get<double>(), side.at("n").get<std::size_t>()};
    w.t = side.at("t").get<double>();
    w.mass = side.at("mass").get<double>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    w.psi.resize(w.axis.n * w.axis.n);
    for (auto& v : w.psi) {
        double re, im;
        in.read(reinterpret_cast<char*>(&re), 8);
        in.read(reinterpret_cast<char*>(&im), 8);
        v = {re, im};
    }
    if (!in) throw Error("snapshot truncated: " + path);
    return w;
}

}  // namespace dsol
