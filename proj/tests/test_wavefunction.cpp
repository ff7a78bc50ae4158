#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "dsol/wavefunction.hpp"

using namespace dsol;
using std::numbers::pi;

namespace {
GaussianSuperposition single(double mean = 0.0, double s0 = 1.0, double v = 0.0, double m = 1.0) {
    return GaussianSuperposition({{1.0, mean, s0, v}}, m);
}
double simpson(const std::function<double(double)>& f, double a, double b, int n = 4000) {
    double h = (b - a) / n, s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(a + i * h);
    return s * h / 3;
}
}  // namespace

TEST(Gaussian, PeakNormalisation) {
    auto g = single(0.7, 1.3);
    EXPECT_NEAR(std::abs(g.eval(0.0, 0.7)), std::pow(2 * pi * 1.69, -0.25), 1e-15);
    EXPECT_NEAR(g.norm(), 1.0, 1e-14);
}

TEST(Gaussian, SuperpositionNormIsUnitAfterScaling) {
    GaussianSuperposition m({{1.0, -1.0, 0.8, 0.3}, {cplx(0.5, 0.2), 1.5, 1.1, -0.4}}, 1.7);
    for (double t : {0.0, 2.5}) {
        double n = simpson([&](double x) { return std::norm(m.eval(t, x)); }, -40, 40, 20000);
        EXPECT_NEAR(n, 1.0, 1e-10) << t;
    }
}

TEST(Gaussian, DoubleSlitMirrorSymmetry) {
    auto m = GaussianSuperposition::double_slit();
    for (double t : {0.0, 1.0, 3.7}) {
        auto j = m.jet(t, 0.0);
        double drho = 2 * (std::conj(j.psi) * j.dpsi).real();
        EXPECT_NEAR(drho, 0.0, 1e-15);
        EXPECT_NEAR(std::norm(m.eval(t, 1.3)), std::norm(m.eval(t, -1.3)), 1e-15);
    }
}

TEST(Gaussian, DispersionLawAgainstSecondMoment) {
    auto g = single(0.0, 1.0, 0.0, 1.0);
    double t = 2.0;
    double var = simpson([&](double x) { return x * x * std::norm(g.eval(t, x)); }, -30, 30);
    EXPECT_NEAR(std::sqrt(var), std::sqrt(1 + std::pow(t / 2, 2)), 1e-9);
}

TEST(Gaussian, JetMatchesFiniteDifferences) {
    GaussianSuperposition m({{1.0, -2.0, 0.9, 0.2}, {1.0, 2.0, 1.0, -0.1}}, 1.0);
    double t = 1.3, x = 0.4, h = 1e-4;
    auto j = m.jet(t, x);
    cplx fd1 = (m.eval(t, x + h) - m.eval(t, x - h)) / (2 * h);
    cplx fd2 = (m.eval(t, x + h) - 2.0 * m.eval(t, x) + m.eval(t, x - h)) / (h * h);
    EXPECT_LT(std::abs(j.dpsi - fd1), 1e-8);
    EXPECT_LT(std::abs(j.d2psi - fd2), 1e-5);
    // Schroedinger: i dpsi/dt = -psi''/2m
    cplx dt = (m.eval(t + h, x) - m.eval(t - h, x)) / (2 * h);
    EXPECT_LT(std::abs(dt - m.dpsi_dt(t, x)), 1e-8);
}

TEST(SplitStep, MatchesAnalyticFreeEvolution) {
    auto m = single(1.0, 1.0, 0.5);
    auto g = Grid1D::periodic(-20, 20, 512);
    auto w = sample_on_grid(m, 0.0, g);
    auto out = split_step_propagate(w, 0.002, 1000);
    double err = 0;
    for (std::size_t i = 0; i < g.n; ++i) err = std::max(err, std::abs(out.psi[i] - m.eval(2.0, g.x(i))));
    EXPECT_LT(err, 1e-10);
    EXPECT_DOUBLE_EQ(out.t, 2.0);
}

TEST(SplitStep, NormConservation) {
    auto m = GaussianSuperposition::double_slit();
    auto g = Grid1D::periodic(-20, 20, 256);
    std::vector<double> V(g.n);
    for (std::size_t i = 0; i < g.n; ++i) V[i] = 0.5 * std::exp(-g.x(i) * g.x(i));
    auto w = sample_on_grid(m, 0.0, g, V);
    double n0 = w.norm();
    auto a = split_step_propagate(w, 0.01, 100);
    EXPECT_LT(std::abs(a.norm() - n0), 1e-8);
    auto b = split_step_propagate(w, 0.01, 10000);
    EXPECT_LT(std::abs(b.norm() - n0) / 10000, 1e-10);
}

TEST(SplitStep, HarmonicCoherentStateReturnsAfterOnePeriod) {
    double m = 1.0, om = 1.0;
    auto g = Grid1D::periodic(-10, 10, 256);
    std::vector<double> V(g.n);
    for (std::size_t i = 0; i < g.n; ++i) V[i] = 0.5 * m * om * om * g.x(i) * g.x(i);
    auto w = sample_on_grid(single(2.0, 1.0 / std::sqrt(2 * m * om), 0.0, m), 0.0, g, V);
    std::size_t steps = 8000;
    auto out = split_step_propagate(w, 2 * pi / om / steps, steps);
    double l1 = 0;
    for (std::size_t i = 0; i < g.n; ++i) l1 += std::abs(std::norm(out.psi[i]) - std::norm(w.psi[i])) * g.dx;
    EXPECT_LT(l1, 1e-6);
}

TEST(SplitStep, PreconditionsNameTheBound) {
    auto g = Grid1D::periodic(-20, 20, 1024);
    auto w = sample_on_grid(single(), 0.0, g);
    EXPECT_THROW(split_step_propagate(w, 1e-3, 1), ConfigError);
    EXPECT_NO_THROW(split_step_propagate(w, 9e-4, 1));
    w.V.assign(g.n, 200.0);
    try {
        split_step_propagate(w, 9e-4, 1);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("max|V|*dt"), std::string::npos);
    }
    EXPECT_THROW(Grid1D::periodic(-1, 1, 1000), ConfigError);
}

TEST(Polar, PlaneWaveOnGrid) {
    auto g = Grid1D::periodic(-pi * 4, pi * 4, 128);
    double k = 0.5;
    GridWavefunction1D w{g, std::vector<cplx>(g.n), 0.0, 1.0, {}};
    for (std::size_t i = 0; i < g.n; ++i) w.psi[i] = std::polar(1.0, k * g.x(i));
    auto f = polar_decompose(w);
    for (std::size_t i = 0; i < g.n; i += 17) {
        EXPECT_NEAR(f[i].R, 1.0, 1e-14);
        EXPECT_NEAR(f[i].gradS, k, 1e-12);
        EXPECT_NEAR(quantum_potential(f[i], false), 0.0, 1e-12);
    }
    // unwrapped along the grid: S increases by k per unit length
    EXPECT_NEAR(f[g.n - 1].S - f[0].S, k * (g.x(g.n - 1) - g.x(0)), 1e-10);
}

TEST(Polar, GaussianCentreHasZeroPhaseGradient) {
    auto g = single(0.8, 1.2);
    for (double t : {0.0, 1.5, 4.0}) EXPECT_NEAR(polar_decompose(g, t, 0.8).gradS, 0.0, 1e-15);
}

TEST(Polar, StaticGaussianQuantumPotential) {
    double s = 1.3, m = 2.0;
    auto g = single(0.0, s, 0.0, m);
    for (double x : {0.0, 0.7, -2.1}) {
        auto f = polar_decompose(g, 0.0, x);
        // R = exp(-x^2/(4 s^2)): -R''/R = (1/(2 s^2)) (1 - x^2/(2 s^2))
        double expect = (1.0 / (2 * s * s)) * (1 - x * x / (2 * s * s));
        EXPECT_NEAR(-f.lapR_over_R, expect, 1e-13);
        EXPECT_NEAR(quantum_potential(f, false), expect / (2 * m), 1e-13);
        // independent finite-difference route on R
        double h = 1e-3;
        auto R = [&](double y) { return std::abs(g.eval(0.0, y)); };
        double fd = (R(x + h) - 2 * R(x) + R(x - h)) / (h * h) / R(x);
        EXPECT_NEAR(f.lapR_over_R, fd, 1e-6);
    }
}

TEST(Polar, QuantumPotentialBetweenFringesConvergesSecondOrder) {
    auto m = GaussianSuperposition::double_slit();
    double t = 2.0, x = 0.9;
    auto f = polar_decompose(m, t, x);
    auto R = [&](double y) { return std::abs(m.eval(t, y)); };
    double e[2];
    for (int k = 0; k < 2; ++k) {
        double h = k == 0 ? 0.02 : 0.01;
        double fd = (R(x + h) - 2 * R(x) + R(x - h)) / (h * h) / R(x);
        e[k] = std::abs(fd - f.lapR_over_R);
    }
    EXPECT_NEAR(std::log2(e[0] / e[1]), 2.0, 0.1);
}

TEST(Polar, NodeAndSuperluminalErrors) {
    GridWavefunction1D w{Grid1D::periodic(-1, 1, 8), std::vector<cplx>(8, 0.0), 0, 1, {}};
    EXPECT_THROW(polar_decompose(w), NodeError);
    PolarFields f;
    f.R = 1;
    f.mass = 1;
    f.boxR_over_R = -2.0;
    EXPECT_THROW(varying_mass(f), SuperluminalRegime);
    f.boxR_over_R = 0.0;
    EXPECT_DOUBLE_EQ(varying_mass(f), 1.0);
}

TEST(Polar, PathAndReverseGiveIdenticalPhase) {
    auto m = GaussianSuperposition::double_slit();
    std::vector<double> xs, rs;
    for (int i = 0; i <= 600; ++i) xs.push_back(-6 + 12.0 * i / 600);
    rs.assign(xs.rbegin(), xs.rend());
    auto a = polar_decompose_path(m, 3.0, xs);
    auto b = polar_decompose_path(m, 3.0, rs);
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(a[i].S, b[xs.size() - 1 - i].S);
    for (std::size_t i = 1; i < xs.size(); ++i) EXPECT_LT(std::abs(a[i].S - a[i - 1].S), pi);
}

TEST(Current, KleinGordonPlaneWave) {
    double m = 1.0, k = 0.75, E = std::sqrt(m * m + k * k);
    KleinGordonPlaneWaves pw({{1.0, k}}, m);
    auto f = pw.polar(0.3, -1.1);
    EXPECT_NEAR(quantum_potential(f, true), 0.0, 1e-12);
    EXPECT_NEAR(varying_mass(f), m, 1e-12);
    FourVector J = probability_current(f);
    EXPECT_NEAR(J.t, E / m, 1e-12);
    EXPECT_NEAR(J.x, k / m, 1e-12);
}

TEST(Current, StandingWaveHasNoSpatialCurrent) {
    auto g = Grid1D::periodic(-pi, pi, 64);
    GridWavefunction1D w{g, std::vector<cplx>(g.n), 0, 1, {}};
    for (std::size_t i = 0; i < g.n; ++i) w.psi[i] = 1.5 + std::cos(2 * g.x(i));
    auto f = polar_decompose(w);
    for (const auto& p : f) EXPECT_NEAR(probability_current(p).x, 0.0, 1e-13);
    EXPECT_NEAR(probability_current(f[3]).t, f[3].R * f[3].R, 1e-15);
}

TEST(Current, ContinuityResidualSecondOrder) {
    auto m = GaussianSuperposition::double_slit();
    double r[2];
    for (int k = 0; k < 2; ++k) {
        std::size_t n = k == 0 ? 256 : 512;
        auto g = Grid1D::periodic(-20, 20, n);
        auto w = sample_on_grid(m, 1.0, g);
        r[k] = continuity_residual(w, k == 0 ? 0.004 : 0.002);
    }
    EXPECT_NEAR(std::log2(r[0] / r[1]), 2.0, 0.3);
}

TEST(Snapshot, BinaryRoundTrip) {
    GridWavefunction2D w{Grid1D::periodic(-2, 2, 8), std::vector<cplx>(64), 0.25, 1.0, {}};
    for (std::size_t i = 0; i < 64; ++i) w.psi[i] = {0.1 * i, -0.3 * i + 1e-17};
    std::string p = ::testing::TempDir() + "snap.bin";
    write_snapshot_binary(w, p);
    auto r = read_snapshot_binary(p);
    EXPECT_EQ(r.psi, w.psi);
    EXPECT_EQ(r.axis.dx, w.axis.dx);
    EXPECT_EQ(r.t, w.t);
}

TEST(SplitStep2D, ProductStateStaysProduct) {
    auto g = Grid1D::periodic(-8, 8, 32);
    auto a = single(-1.0, 1.0, 0.3), b = single(1.0, 0.8, -0.2);
    GridWavefunction2D w{g, std::vector<cplx>(g.n * g.n), 0, 1, {}};
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < g.n; ++j) w.psi[i * g.n + j] = a.eval(0, g.x(i)) * b.eval(0, g.x(j));
    auto out = split_step_propagate(w, 0.01, 50, 2);
    double err = 0;
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < g.n; ++j)
            err = std::max(err, std::abs(out.psi[i * g.n + j] - a.eval(0.5, g.x(i)) * b.eval(0.5, g.x(j))));
    EXPECT_LT(err, 1e-6);
}
