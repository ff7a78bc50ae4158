#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsol/errors.hpp"
#include "dsol/io.hpp"
#include "dsol/quadrature.hpp"

namespace dsol {

// Natural units c = hbar = 1, signature (+,-,-,-).
struct FourVector {
    double t = 0, x = 0, y = 0, z = 0;

    constexpr double operator[](int i) const {
        return i == 0 ? t : i == 1 ? x : i == 2 ? y : z;
    }
    constexpr double& operator[](int i) { return i == 0 ? t : i == 1 ? x : i == 2 ? y : z; }

    constexpr FourVector operator+(const FourVector& o) const { return {t + o.t, x + o.x, y + o.y, z + o.z}; }
    constexpr FourVector operator-(const FourVector& o) const { return {t - o.t, x - o.x, y - o.y, z - o.z}; }
    constexpr FourVector operator-() const { return {-t, -x, -y, -z}; }
    constexpr FourVector operator*(double s) const { return {t * s, x * s, y * s, z * s}; }
    constexpr FourVector operator/(double s) const { return {t / s, x / s, y / s, z / s}; }
    constexpr FourVector& operator+=(const FourVector& o) { return *this = *this + o; }
    constexpr FourVector& operator-=(const FourVector& o) { return *this = *this - o; }
    constexpr bool operator==(const FourVector&) const = default;

    double spatial_norm() const { return std::sqrt(x * x + y * y + z * z); }
    double euclidean_norm() const { return std::sqrt(t * t + x * x + y * y + z * z); }
};

constexpr FourVector operator*(double s, const FourVector& v) { return v * s; }

constexpr double minkowski_dot(const FourVector& a, const FourVector& b) noexcept {
    return a.t * b.t - a.x * b.x - a.y * b.y - a.z * b.z;
}

// Lower or raise an index (the same operation for a diagonal metric).
constexpr FourVector flip_index(const FourVector& v) { return {v.t, -v.x, -v.y, -v.z}; }

enum class Causal { Timelike, Null, Spacelike };

inline Causal classify(const FourVector& v, double scale = 1.0) {
    double d = minkowski_dot(v, v);
    if (std::abs(d) < 1e-9 * scale * scale) return Causal::Null;
    return d > 0 ? Causal::Timelike : Causal::Spacelike;
}

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

// Coordinates of event v in the frame moving with velocity beta relative to the current one.
inline FourVector boost(const FourVector& v, const Vec3& beta) {
    double b2 = beta.x * beta.x + beta.y * beta.y + beta.z * beta.z;
    if (b2 >= 1.0) throw InvalidArgument("boost: |beta| must be < 1");
    if (b2 == 0.0) return v;
    double g = 1.0 / std::sqrt(1.0 - b2);
    double bx = beta.x * v.x + beta.y * v.y + beta.z * v.z;
    double k = (g - 1.0) * bx / b2 - g * v.t;
    return {g * (v.t - bx), v.x + k * beta.x, v.y + k * beta.y, v.z + k * beta.z};
}

// Orthonormal tetrad {u, e1, e2, e3} whose spatial legs span the rest-frame hyperplane of u.
inline std::array<FourVector, 4> rest_frame_basis(const FourVector& u) {
    double g = u.t;
    Vec3 b{u.x / g, u.y / g, u.z / g};
    double b2 = b.x * b.x + b.y * b.y + b.z * b.z;
    std::array<FourVector, 4> e{};
    e[0] = u;
    double bb[3] = {b.x, b.y, b.z};
    for (int i = 0; i < 3; ++i) {
        FourVector ei;
        ei.t = g * bb[i];
        for (int j = 0; j < 3; ++j) {
            double d = (i == j ? 1.0 : 0.0);
            if (b2 > 0) d += (g - 1.0) * bb[i] * bb[j] / b2;
            ei[j + 1] = d;
        }
        e[i + 1] = ei;
    }
    return e;
}

// Not-a-knot cubic spline on a uniform grid.
class UniformCubicSpline {
public:
    UniformCubicSpline() = default;

    UniformCubicSpline(double x0, double h, std::vector<double> y) : x0_(x0), h_(h), y_(std::move(y)) {
        const std::size_t n = y_.size();
        if (n < 4) throw InvalidArgument("UniformCubicSpline: need at least 4 samples");
        if (!(h > 0)) throw InvalidArgument("UniformCubicSpline: spacing must be positive");
        m_.assign(n, 0.0);
        auto rhs = [&](std::size_t i) { return 6.0 * (y_[i - 1] - 2.0 * y_[i] + y_[i + 1]) / (h * h); };
        m_[1] = rhs(1) / 6.0;
        m_[n - 2] = rhs(n - 2) / 6.0;
        // interior unknowns m_[2..n-3]: tridiagonal (1,4,1)
        if (n > 4) {
            std::size_t lo = 2, hi = n - 3;
            std::size_t k = hi - lo + 1;
            std::vector<double> c(k), d(k);
            for (std::size_t j = 0; j < k; ++j) {
                std::size_t i = lo + j;
                double r = rhs(i);
                if (j == 0) r -= m_[1];
                if (j == k - 1) r -= m_[n - 2];
                if (j == 0) {
                    c[j] = 1.0 / 4.0;
                    d[j] = r / 4.0;
                } else {
                    double den = 4.0 - c[j - 1];
                    c[j] = 1.0 / den;
                    d[j] = (r - d[j - 1]) / den;
                }
            }
            for (std::size_t j = k; j-- > 0;) {
                m_[lo + j] = d[j] - (j + 1 < k ? c[j] * m_[lo + j + 1] : 0.0);
            }
        }
        m_[0] = 2.0 * m_[1] - m_[2];
        m_[n - 1] = 2.0 * m_[n - 2] - m_[n - 3];
    }

    double operator()(double x) const {
        auto [i, a, b] = locate(x);
        return a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h_ * h_ / 6.0;
    }
    double derivative(double x) const {
        auto [i, a, b] = locate(x);
        return (y_[i + 1] - y_[i]) / h_ + ((1.0 - 3.0 * a * a) * m_[i] + (3.0 * b * b - 1.0) * m_[i + 1]) * h_ / 6.0;
    }
    double second_derivative(double x) const {
        auto [i, a, b] = locate(x);
        return a * m_[i] + b * m_[i + 1];
    }
    std::size_t size() const { return y_.size(); }

private:
    struct Loc {
        std::size_t i;
        double a, b;
    };
    Loc locate(double x) const {
        double s = (x - x0_) / h_;
        double fi = std::floor(s);
        std::size_t i;
        if (fi < 0) i = 0;
        else if (fi > static_cast<double>(y_.size() - 2)) i = y_.size() - 2;
        else i = static_cast<std::size_t>(fi);
        double b = s - static_cast<double>(i);
        return {i, 1.0 - b, b};
    }

    double x0_ = 0, h_ = 1;
    std::vector<double> y_, m_;
};

// Proper-time derivatives of z at one parameter value.
struct KinematicDerivatives {
    FourVector zdot, zddot, zdddot;
};

class Worldline {
public:
    // samples[i] = z(lambda0 + i*dlambda)
    Worldline(double lambda0, double dlambda, std::vector<FourVector> samples)
        : lambda0_(lambda0), dl_(dlambda), z_(std::move(samples)) {
        const std::size_t n = z_.size();
        if (n < 5) throw InvalidArgument("Worldline: need at least 5 samples");
        if (!(dlambda > 0)) throw InvalidArgument("Worldline: lambda spacing must be positive");
        for (std::size_t i = 1; i < n; ++i)
            if (!(z_[i].t > z_[i - 1].t)) throw InvalidArgument("Worldline: z.t must increase strictly with lambda");
        for (int c = 0; c < 4; ++c) {
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = z_[i][c];
            spline_[c] = UniformCubicSpline(lambda0_, dl_, std::move(y));
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (double f : {0.0, 0.5}) {
                FourVector d = tangent(lambda_at(i) + f * dl_);
                if (!(minkowski_dot(d, d) > 0) || !(d.t > 0))
                    throw InvalidArgument("Worldline: not subluminal near sample " + std::to_string(i));
            }
        }
        tau_.assign(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i)
            tau_[i + 1] = tau_[i] + integrate_gl5([this](double l) { return speed(l); }, lambda_at(i), lambda_at(i + 1));
        set_tau_origin();
    }

    // Lab-time parametrised path: lambda = t.
    static Worldline from_lab_path(double t0, double dt, const std::vector<Vec3>& positions) {
        std::vector<FourVector> s(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i)
            s[i] = {t0 + dt * static_cast<double>(i), positions[i].x, positions[i].y, positions[i].z};
        return Worldline(t0, dt, std::move(s));
    }

    static Worldline from_function(double l0, double l1, std::size_t n, const std::function<FourVector(double)>& f) {
        if (n < 5) throw InvalidArgument("Worldline: need at least 5 samples");
        double h = (l1 - l0) / static_cast<double>(n - 1);
        std::vector<FourVector> s(n);
        for (std::size_t i = 0; i < n; ++i) s[i] = f(l0 + h * static_cast<double>(i));
        return Worldline(l0, h, std::move(s));
    }

    double lambda_min() const { return lambda0_; }
    double lambda_max() const { return lambda_at(z_.size() - 1); }
    double step() const { return dl_; }
    std::size_t size() const { return z_.size(); }
    const std::vector<FourVector>& samples() const { return z_; }
    double lambda_at(std::size_t i) const { return lambda0_ + dl_ * static_cast<double>(i); }

    FourVector position(double lam) const {
        return {spline_[0](lam), spline_[1](lam), spline_[2](lam), spline_[3](lam)};
    }
    // dz/dlambda from the spline
    FourVector tangent(double lam) const {
        return {spline_[0].derivative(lam), spline_[1].derivative(lam), spline_[2].derivative(lam),
                spline_[3].derivative(lam)};
    }
    double speed(double lam) const {
        FourVector d = tangent(lam);
        return std::sqrt(minkowski_dot(d, d));
    }
    FourVector four_velocity(double lam) const {
        FourVector d = tangent(lam);
        return d / std::sqrt(minkowski_dot(d, d));
    }

    double proper_time(double lam) const {
        check_range(lam);
        std::size_t i = interval(lam);
        return tau_[i] + tau_offset_ + integrate_gl5([this](double l) { return speed(l); }, lambda_at(i), lam);
    }

    double lambda_at_proper_time(double tau) const {
        double raw = tau - tau_offset_;
        const double tol = 1e-12 * std::max(1.0, std::abs(raw));
        if (raw < tau_.front() - tol || raw > tau_.back() + tol)
            throw RangeError("Worldline: proper time outside sampled range");
        auto it = std::upper_bound(tau_.begin(), tau_.end(), raw);
        std::size_t i = it == tau_.begin() ? 0 : static_cast<std::size_t>(it - tau_.begin()) - 1;
        if (i >= tau_.size() - 1) i = tau_.size() - 2;
        double a = lambda_at(i), b = lambda_at(i + 1);
        double lam = a + (raw - tau_[i]) / (tau_[i + 1] - tau_[i]) * dl_;
        for (int it2 = 0; it2 < 50; ++it2) {
            double f = tau_[i] + integrate_gl5([this](double l) { return speed(l); }, a, lam) - raw;
            double step = f / speed(lam);
            lam = std::clamp(lam - step, a, b);
            if (std::abs(step) < 4e-16 * std::max(1.0, std::abs(lam))) break;
        }
        return lam;
    }

    // Centred differences on the interpolant with h = dlambda, chain rule to proper time.
    KinematicDerivatives derivatives(double lam) const {
        const double h = dl_;
        const double slack = 1e-9 * dl_;
        if (lam - 2 * h < lambda_min() - slack || lam + 2 * h > lambda_max() + slack)
            throw StencilError("worldline_derivatives: lambda within two samples of an end");
        FourVector zm2 = position(lam - 2 * h), zm1 = position(lam - h), z0 = position(lam);
        FourVector zp1 = position(lam + h), zp2 = position(lam + 2 * h);
        FourVector z1 = (zp1 - zm1) / (2 * h);
        FourVector z2 = (zp1 - 2.0 * z0 + zm1) / (h * h);
        FourVector z3 = (zp2 - 2.0 * zp1 + 2.0 * zm1 - zm2) / (2 * h * h * h);
        return chain_rule(z1, z2, z3);
    }

    static KinematicDerivatives chain_rule(const FourVector& z1, const FourVector& z2, const FourVector& z3) {
        double s2 = minkowski_dot(z1, z1);
        double s = std::sqrt(s2);
        double p = minkowski_dot(z1, z2);
        double dp = minkowski_dot(z2, z2) + minkowski_dot(z1, z3);
        KinematicDerivatives k;
        k.zdot = z1 / s;
        k.zddot = z2 / s2 - z1 * (p / (s2 * s2));
        double s5 = s2 * s2 * s, s7 = s5 * s2;
        k.zdddot = z3 / (s2 * s) - z2 * (3.0 * p / s5) - z1 * (dp / s5) + z1 * (4.0 * p * p / s7);
        return k;
    }

    std::uint64_t hash() const {
        Fnv1a h;
        h.update(lambda0_);
        h.update(dl_);
        for (const auto& v : z_) {
            h.update(v.t);
            h.update(v.x);
            h.update(v.y);
            h.update(v.z);
        }
        return h.digest();
    }

    void write_csv(std::ostream& out) const {
        out << "lambda,t,x,y,z\n";
        for (std::size_t i = 0; i < z_.size(); ++i) {
            const auto& v = z_[i];
            out << fmt(lambda_at(i)) << ',' << fmt(v.t) << ',' << fmt(v.x) << ',' << fmt(v.y) << ',' << fmt(v.z)
                << '\n';
        }
    }

    static Worldline read_csv(std::istream& in) {
        std::string line;
        if (!std::getline(in, line) || line.rfind("lambda,t,x,y,z", 0) != 0)
            throw InvalidArgument("worldline csv: missing header lambda,t,x,y,z");
        std::vector<double> lam;
        std::vector<FourVector> z;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string cell;
            double v[5];
            for (int k = 0; k < 5; ++k) {
                if (!std::getline(ss, cell, ',')) throw InvalidArgument("worldline csv: short row");
                v[k] = std::stod(cell);
            }
            lam.push_back(v[0]);
            z.push_back({v[1], v[2], v[3], v[4]});
        }
        if (lam.size() < 5) throw InvalidArgument("worldline csv: need at least 5 rows");
        double h = (lam.back() - lam.front()) / static_cast<double>(lam.size() - 1);
        for (std::size_t i = 1; i < lam.size(); ++i)
            if (std::abs(lam[i] - lam[i - 1] - h) > 1e-9 * std::max(1.0, std::abs(h)))
                throw InvalidArgument("worldline csv: lambda must be uniformly spaced");
        return Worldline(lam.front(), h, std::move(z));
    }

private:
    void check_range(double lam) const {
        double slack = 1e-12 * std::max({1.0, std::abs(lambda_min()), std::abs(lambda_max())});
        if (lam < lambda_min() - slack || lam > lambda_max() + slack)
            throw RangeError("Worldline: lambda outside sampled range");
    }
    std::size_t interval(double lam) const {
        double s = std::floor((lam - lambda0_) / dl_);
        if (s < 0) return 0;
        if (s > static_cast<double>(z_.size() - 2)) return z_.size() - 2;
        return static_cast<std::size_t>(s);
    }

    // tau = 0 at lab time t = 0 when covered; otherwise extrapolate uniformly from the first sample.
    void set_tau_origin() {
        tau_offset_ = 0.0;
        if (z_.front().t <= 0.0 && z_.back().t >= 0.0) {
            double a = lambda_min(), b = lambda_max();
            for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
                double m = 0.5 * (a + b);
                (position(m).t < 0.0 ? a : b) = m;
            }
            double lam = 0.5 * (a + b);
            std::size_t i = interval(lam);
            double raw = tau_[i] + integrate_gl5([this](double l) { return speed(l); }, lambda_at(i), lam);
            tau_offset_ = -raw;
        } else {
            FourVector d = tangent(lambda_min());
            tau_offset_ = z_.front().t * std::sqrt(minkowski_dot(d, d)) / d.t;
        }
    }

    double lambda0_, dl_;
    std::vector<FourVector> z_;
    std::array<UniformCubicSpline, 4> spline_;
    std::vector<double> tau_;
    double tau_offset_ = 0.0;
};

// Amplitude g(tau) > 0 and phase S(tau) carried by the source along a worldline.
struct SourceLaw {
    std::function<double(double)> g, g_dot, S, S_dot;
    std::string description;

    static SourceLaw harmonic(double g0, double omega) {
        SourceLaw law;
        law.g = [g0](double) { return g0; };
        law.g_dot = [](double) { return 0.0; };
        law.S = [omega](double tau) { return -omega * tau; };
        law.S_dot = [omega](double) { return -omega; };
        law.description = "harmonic g=" + fmt(g0) + " omega=" + fmt(omega);
        return law;
    }

    // S(tau) = -integral of M dtau, with M tabulated on a uniform tau grid (tau0 at S = 0).
    static SourceLaw hamilton_jacobi(double g0, double tau0, double dtau, std::vector<double> mass) {
        if (mass.size() < 4) throw InvalidArgument("SourceLaw: need at least 4 mass samples");
        std::vector<double> s(mass.size(), 0.0);
        UniformCubicSpline m(tau0, dtau, mass);
        for (std::size_t i = 0; i + 1 < mass.size(); ++i) {
            double a = tau0 + dtau * static_cast<double>(i);
            s[i + 1] = s[i] - integrate_gl5([&](double t) { return m(t); }, a, a + dtau);
        }
        auto ms = std::make_shared<UniformCubicSpline>(m);
        auto ss = std::make_shared<UniformCubicSpline>(tau0, dtau, std::move(s));
        SourceLaw law;
        law.g = [g0](double) { return g0; };
        law.g_dot = [](double) { return 0.0; };
        law.S = [ss](double tau) { return (*ss)(tau); };
        law.S_dot = [ms](double tau) { return -(*ms)(tau); };
        law.description = "hamilton-jacobi g=" + fmt(g0);
        return law;
    }
};

}  // namespace dsol
