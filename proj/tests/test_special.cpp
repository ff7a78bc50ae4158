#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dsol/quadrature.hpp"
#include "dsol/special.hpp"

using namespace dsol;
using std::numbers::pi;

TEST(SphericalBessel, Origin) {
    EXPECT_EQ(spherical_bessel_j(0, 0.0), 1.0);
    for (int l = 1; l < 6; ++l) EXPECT_EQ(spherical_bessel_j(l, 0.0), 0.0);
}

TEST(SphericalBessel, ClosedFormJ1) {
    EXPECT_NEAR(spherical_bessel_j(1, 1.0), std::sin(1.0) - std::cos(1.0), 1e-15);
    EXPECT_NEAR(spherical_bessel_j(1, 1.0), 0.3011687, 1e-7);
}

TEST(SphericalBessel, RecurrenceResidual) {
    for (double x : {0.3, 2.0, 7.5, 31.0}) {
        auto j = spherical_bessel_j_all(41, x);
        for (int l = 1; l <= 40; ++l) EXPECT_LT(std::abs(j[l - 1] + j[l + 1] - (2 * l + 1) / x * j[l]), 1e-10);
    }
}

TEST(SphericalBessel, AgreesWithStandardLibrary) {
    for (double x : {1e-3, 0.5, 3.0, 12.0, 40.0}) {
        auto j = spherical_bessel_j_all(40, x);
        for (unsigned l = 0; l <= 40; ++l) {
            double ref = std::sph_bessel(l, x);
            if (std::abs(ref) < 1e-280) continue;
            EXPECT_NEAR(j[l], ref, 1e-12 * std::abs(ref) + 1e-15) << "l=" << l << " x=" << x;
        }
    }
}

TEST(SphericalHarmonic, LowOrderValues) {
    EXPECT_NEAR(std::abs(spherical_harmonic(0, 0, 0.4, 1.1) - 1 / std::sqrt(4 * pi)), 0.0, 1e-15);
    EXPECT_NEAR(spherical_harmonic(1, 0, 0.0, 0.0).real(), std::sqrt(3 / (4 * pi)), 1e-15);
    // Condon-Shortley: Y_11 = -sqrt(3/8pi) sin(theta) e^{i phi}
    auto y11 = spherical_harmonic(1, 1, 0.7, 0.3);
    auto expect = -std::sqrt(3 / (8 * pi)) * std::sin(0.7) * std::polar(1.0, 0.3);
    EXPECT_NEAR(std::abs(y11 - expect), 0.0, 1e-15);
    EXPECT_THROW(spherical_harmonic(2, 3, 0.1, 0.1), InvalidArgument);
}

TEST(SphericalHarmonic, AgreesWithStandardLibrary) {
    for (double th : {0.1, 1.2, 2.9})
        for (unsigned l = 0; l <= 40; l += 3)
            for (unsigned m = 0; m <= l; m += 2) {
                double ref = std::sph_legendre(l, m, th);
                auto y = spherical_harmonic(int(l), int(m), th, 0.0);
                EXPECT_NEAR(y.real(), ref, 1e-12) << l << ' ' << m;
                auto yn = spherical_harmonic(int(l), -int(m), th, 0.0);
                EXPECT_NEAR(yn.real(), (m % 2 ? -1 : 1) * ref, 1e-12);
            }
}

TEST(SphericalHarmonic, QuadratureOrthonormality) {
    int L = 12;
    auto gl = gauss_legendre(64);
    const int nphi = 128;
    std::vector<SphericalHarmonicTable> tabs;
    std::vector<double> w;
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < nphi; ++j) {
            tabs.emplace_back(L, std::acos(gl.nodes[i]), 2 * pi * (j + 0.5) / nphi);
            w.push_back(gl.weights[i] * 2 * pi / nphi);
        }
    double worst = 0;
    for (int l = 0; l <= L; ++l)
        for (int m = -l; m <= l; ++m)
            for (int l2 = 0; l2 <= L; ++l2)
                for (int m2 = -l2; m2 <= l2; ++m2) {
                    std::complex<double> s = 0;
                    for (std::size_t k = 0; k < tabs.size(); ++k) s += w[k] * tabs[k](l, m) * std::conj(tabs[k](l2, m2));
                    double expect = (l == l2 && m == m2) ? 1.0 : 0.0;
                    worst = std::max(worst, std::abs(s - expect));
                }
    EXPECT_LT(worst, 1e-8);
}

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
    auto r = gauss_legendre(7);
    double s = 0, wsum = 0;
    for (int i = 0; i < 7; ++i) {
        s += r.weights[i] * std::pow(r.nodes[i], 12);
        wsum += r.weights[i];
    }
    EXPECT_NEAR(wsum, 2.0, 1e-14);
    EXPECT_NEAR(s, 2.0 / 13.0, 1e-14);
}
