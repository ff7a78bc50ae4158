#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dsol/verify.hpp"

using namespace dsol;

namespace {
Worldline uniform(double v, double t0 = -40, double t1 = 40, std::size_t n = 801) {
    return Worldline::from_function(t0, t1, n, [v](double t) { return FourVector{t, v * t, 0, 0}; });
}
Worldline circle(double R, double v, double t0, double t1, std::size_t n) {
    double W = v / R;
    return Worldline::from_function(t0, t1, n, [=](double t) {
        return FourVector{t, R * std::cos(W * t), R * std::sin(W * t), 0};
    });
}
FieldEvaluator wavelet_eval() {
    return [](const FourVector& x) { return stationary_wavelet(1, 1, x.t, x.spatial_norm()); };
}
}  // namespace

TEST(Dalembert, StationaryWaveletSmall) {
    EXPECT_LT(dalembert_residual(wavelet_eval(), {3, 2, 0, 0}, 0.01), 1e-3);
}

TEST(Dalembert, PlaneWaveNullSolution) {
    auto f = [](const FourVector& x) { return std::polar(1.0, 2.0 * x.t - 2.0 * x.x); };
    EXPECT_LT(dalembert_residual(f, {0.3, 0.2, 0.1, 0}, 0.01), 1e-3);
}

TEST(Dalembert, SymmetricControlDiverges) {
    Worldline w = uniform(0.0);
    auto law = SourceLaw::harmonic(1.0, 1.0);
    FieldEvaluator a = [&](const FourVector& x) { return antisymmetric_field(w, law, x, 0.0).value; };
    FieldEvaluator s = [&](const FourVector& x) { return lw_field(w, law, x, GreenKind::Symmetric); };
    FourVector x{3, 0.01, 0, 0};
    EXPECT_GT(dalembert_residual(s, x, 0.005), 1e3 * dalembert_residual(a, x, 0.005));
}

TEST(Dalembert, StudyOrderNearUniformSource) {
    Worldline w = uniform(0.6);
    auto law = SourceLaw::harmonic(1.0, 1.0);
    FieldEvaluator f = [&](const FourVector& x) { return antisymmetric_field(w, law, x, 0.0).value; };
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<FourVector> pts;
    for (int i = 0; i < 20; ++i) {
        double r = 0.06 + 0.04 * std::abs(U(rng));
        Vec3 d{U(rng), U(rng), U(rng)};
        double n = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
        pts.push_back(boost(FourVector{2 * U(rng), r * d.x / n, r * d.y / n, r * d.z / n}, {-0.6, 0, 0}));
    }
    auto rep = dalembert_study("uniform", f, pts, {0.02, 0.01, 0.005}, 0.05);
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_NEAR(*rep.order, 2.0, 0.2);
    auto j = rep.to_json();
    EXPECT_EQ(j["detail"]["orders"].size(), 2u);
}

TEST(PhaseGradient, StaticIsExactlyParallel) {
    Worldline w = uniform(0.0);
    auto law = SourceLaw::harmonic(1.0, 1.0);
    auto p = phase_gradient_check(w, law, 2.0, 0.1);
    EXPECT_EQ(p.probes, 6u);
    EXPECT_NEAR(p.gradient.t, -1.0, 1e-9);  // d^mu phi = Sdot zdot with Sdot = -1
    EXPECT_NEAR(p.gradient.x, 0.0, 1e-9);
    EXPECT_LT(p.angle, 1e-8);
}

TEST(PhaseGradient, UniformMotionParallel) {
    Worldline w = uniform(0.6);
    auto law = SourceLaw::harmonic(1.0, 1.0);
    auto p = phase_gradient_check(w, law, 1.0, 0.1);
    EXPECT_LT(p.angle, 1e-6);
    EXPECT_LT(p.residual_parallel, 1e-6);
}

TEST(PhaseGradient, FullFormulaBeatsParallelOnGentleOrbit) {
    Worldline w = circle(1.05, 0.03, -60, 60, 24001);
    auto law = SourceLaw::harmonic(1.0, 1.0);
    auto rep = phase_gradient_study(w, law, {-5, -1, 0, 2, 4}, 0.05, 1e-3);
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    for (const auto& row : rep.detail["samples"])
        EXPECT_LT(row["residual_full"].get<double>(), 0.1 * row["residual_parallel"].get<double>());
}

TEST(PhaseGradient, VaryingAmplitudeShiftsByChiDot) {
    // g = exp(0.1 tau): gdot/g = 0.1 constant, so chi is constant and the parallel part stays Sdot zdot
    Worldline w = uniform(0.0);
    SourceLaw law = SourceLaw::harmonic(1.0, 1.0);
    law.g = [](double tau) { return std::exp(0.1 * tau); };
    law.g_dot = [](double tau) { return 0.1 * std::exp(0.1 * tau); };
    auto p = phase_gradient_check(w, law, 1.0, 0.05);
    EXPECT_NEAR(p.gradient.t, -1.0, 1e-6);
    EXPECT_LT(p.residual_full, 1e-6);
}

TEST(GuidanceConsistency, UniformSourceAndMismatchedControl) {
    Worldline w = uniform(0.3);
    auto law = SourceLaw::harmonic(1.0, 1.0);
    FieldEvaluator f = [&](const FourVector& x) { return antisymmetric_field(w, law, x, 0.0).value; };
    std::vector<double> lams{-3, -1, 0, 1, 3};
    auto rep = guidance_consistency(w, f, lams, 0.1, 1e-6);
    EXPECT_TRUE(rep.pass) << rep.to_json().dump();
    EXPECT_LT(rep.max, 1e-6);
    Worldline other = Worldline::from_function(-40, 40, 801, [](double t) { return FourVector{t, -0.2 * t + 0.5, 0, 0}; });
    auto bad = guidance_consistency(other, f, lams, 0.1, 1e-6, true);
    EXPECT_TRUE(bad.pass);  // missed as expected
    EXPECT_GT(bad.max, 0.1);
}

TEST(Newton, FreePlaneWave) {
    KleinGordonPlaneWaves kg({{1.0, 0.7}}, 1.0);
    IntegratorConfig cfg;
    cfg.dt_out = 0.05;
    auto tr = integrate_relativistic(kg, 0.0, 0.0, 5.0, cfg);
    MassField M = [&](const FourVector& x) { return varying_mass(kg.polar(x.t, x.x)); };
    auto rep = newton_residual(tr, M);
    EXPECT_GT(rep.points, 50u);
    EXPECT_LT(rep.max, 1e-8);
}

// Output spacing caps the step, so integrator error sits far below the finite-difference floor of the
// sampled worldline; refinement is therefore in dt_out (order 2), tolerance has no visible effect.
TEST(Newton, SuperpositionResidualConvergesUnderRefinement) {
    KleinGordonPlaneWaves kg({{1.0, 0.3}, {0.3, -0.5}}, 1.0);
    MassField M = [&](const FourVector& x) { return varying_mass(kg.polar(x.t, x.x)); };
    auto run = [&](double dt_out, double tol) {
        IntegratorConfig cfg;
        cfg.atol = cfg.rtol = tol;
        cfg.dt_out = dt_out;
        return newton_residual(integrate_relativistic(kg, 0.1, 0.0, 4.0, cfg), M).max;
    };
    double r1 = run(0.04, 1e-6), r2 = run(0.02, 1e-6), r3 = run(0.01, 1e-6);
    EXPECT_NEAR(std::log2(r1 / r2), 2.0, 0.2);
    EXPECT_NEAR(std::log2(r2 / r3), 2.0, 0.2);
    EXPECT_NEAR(run(0.02, 1e-3), r2, 1e-3 * r2);
}

TEST(Newton, ConstantFieldLorentzForce) {
    // hyperbolic motion under E along x: x(t) = (sqrt(1 + (eE t/m)^2) - 1) m/(eE)
    double m = 1.0, e = 1.0, E = 0.5;
    Trajectory tr;
    for (int i = 0; i <= 400; ++i) {
        double t = 0.01 * i;
        tr.t.push_back(t);
        tr.x.push_back((std::sqrt(1 + std::pow(e * E * t / m, 2)) - 1) * m / (e * E));
    }
    MassField M = [m](const FourVector&) { return m; };
    FieldTensor F = [E](const FourVector&) {
        std::array<std::array<double, 4>, 4> f{};
        f[1][0] = E;  // F^{10} = E_x
        f[0][1] = -E;
        return f;
    };
    auto rep = newton_residual(tr, M, e, F);
    EXPECT_LT(rep.max, 1e-5);  // sampling floor at dt = 0.01
    auto wrong = newton_residual(tr, M, -e, F);
    EXPECT_GT(wrong.max, 0.1);
}

TEST(BornEquivariance, SingleGaussianAndInitialNoise) {
    GaussianSuperposition g({{1.0, 0.0, 1.0, 0.0}}, 1.0);
    const std::size_t N = 10000;
    auto x0 = sample_born(g, 0.0, N, 1);
    IntegratorConfig cfg;
    cfg.dt_out = 0.5;
    auto ens = run_ensemble(g, x0, 0.0, 4.0, cfg, 2, 1, g.hash());
    auto r0 = born_equivariance(g, ens, 0.0, 64, g.support(4.0, 6));
    EXPECT_LT(r0.max, 3 * r0.detail["expected_noise_l1"].get<double>());
    auto r4 = born_equivariance(g, ens, 4.0, 64, g.support(4.0, 6));
    EXPECT_TRUE(r4.pass) << r4.max;
    EXPECT_EQ(r4.skipped, 0u);
}
