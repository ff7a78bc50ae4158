#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dsol/errors.hpp"

namespace dsol {

// j_0..j_lmax at x by Miller's downward recurrence, normalised on j_0 or j_1.
inline std::vector<double> spherical_bessel_j_all(int lmax, double x) {
    if (lmax < 0) throw InvalidArgument("spherical_bessel_j: l must be >= 0");
    std::vector<double> j(lmax + 1, 0.0);
    if (x == 0.0) {
        j[0] = 1.0;
        return j;
    }
    double ax = std::abs(x);
    if (ax < 1e-6) {
        // leading term x^l / (2l+1)!!; enough for tiny arguments
        double term = 1.0;
        for (int l = 0; l <= lmax; ++l) {
            if (l > 0) term *= x / (2.0 * l + 1.0);
            j[l] = term * (1.0 - x * x / (2.0 * (2.0 * l + 3.0)));
        }
        return j;
    }
    const int top = std::max(lmax, 1);
    std::vector<double> raw(top + 1, 0.0);
    int start = top + static_cast<int>(std::ceil(ax)) + 20 + static_cast<int>(std::sqrt(40.0 * (top + ax)));
    double jp1 = 0.0, jl = 1e-300;
    for (int l = start; l > 0; --l) {
        double jm1 = (2.0 * l + 1.0) / x * jl - jp1;
        jp1 = jl;
        jl = jm1;
        if (l - 1 <= top) raw[l - 1] = jl;
        if (l <= top) raw[l] = jp1;
        if (std::abs(jl) > 1e250) {
            jl *= 1e-250;
            jp1 *= 1e-250;
            for (int k = l - 1; k <= top; ++k) raw[k] *= 1e-250;
        }
    }
    double s = std::sin(x), c = std::cos(x);
    double j0 = s / x, j1 = s / (x * x) - c / x;
    double scale = std::abs(j0) >= std::abs(j1) ? j0 / raw[0] : j1 / raw[1];
    for (int l = 0; l <= lmax; ++l) j[l] = raw[l] * scale;
    return j;
}

inline double spherical_bessel_j(int l, double x) { return spherical_bessel_j_all(l, x)[static_cast<std::size_t>(l)]; }

// Orthonormal Y_lm(theta, phi) with the Condon-Shortley phase, all 0 <= m <= l <= lmax.
// Entry index l*(l+1)/2 + m.
class SphericalHarmonicTable {
public:
    SphericalHarmonicTable(int lmax, double theta, double phi) : lmax_(lmax) {
        if (lmax < 0) throw InvalidArgument("spherical_harmonic: lmax must be >= 0");
        std::size_t n = static_cast<std::size_t>((lmax + 1) * (lmax + 2) / 2);
        p_.assign(n, 0.0);
        double x = std::cos(theta), s = std::sin(theta);
        double pmm = std::sqrt(1.0 / (4.0 * std::numbers::pi));
        for (int m = 0; m <= lmax; ++m) {
            if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
            p_[idx(m, m)] = pmm;
            if (m + 1 <= lmax) p_[idx(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * pmm;
            for (int l = m + 2; l <= lmax; ++l) {
                double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
                double b = std::sqrt(((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m) /
                                     (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
                p_[idx(l, m)] = a * (x * p_[idx(l - 1, m)] - b * p_[idx(l - 2, m)]);
            }
        }
        e_.resize(static_cast<std::size_t>(lmax + 1));
        for (int m = 0; m <= lmax; ++m) e_[m] = std::polar(1.0, m * phi);
    }

    std::complex<double> operator()(int l, int m) const {
        if (l < 0 || l > lmax_ || std::abs(m) > l) throw InvalidArgument("spherical_harmonic: need |m| <= l <= lmax");
        int am = std::abs(m);
        std::complex<double> y = p_[idx(l, am)] * e_[am];
        if (m < 0) y = ((am % 2) ? -1.0 : 1.0) * std::conj(y);
        return y;
    }
    // normalised associated Legendre part
    double legendre(int l, int m) const { return p_[idx(l, m)]; }

private:
    static std::size_t idx(int l, int m) { return static_cast<std::size_t>(l * (l + 1) / 2 + m); }
    int lmax_;
    std::vector<double> p_;
    std::vector<std::complex<double>> e_;
};

inline std::complex<double> spherical_harmonic(int l, int m, double theta, double phi) {
    if (l < 0 || std::abs(m) > l) throw InvalidArgument("spherical_harmonic: need |m| <= l");
    return SphericalHarmonicTable(l, theta, phi)(l, m);
}

}  // namespace dsol
