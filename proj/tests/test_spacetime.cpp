#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "dsol/spacetime.hpp"

using namespace dsol;

namespace {

Worldline circular(double R, double v, double t0, double t1, std::size_t n) {
    double om = v / R;
    return Worldline::from_function(t0, t1, n, [=](double t) {
        return FourVector{t, R * std::cos(om * t), R * std::sin(om * t), 0.0};
    });
}

}  // namespace

TEST(Minkowski, DotProducts) {
    EXPECT_EQ(minkowski_dot({1, 0, 0, 0}, {1, 0, 0, 0}), 1.0);
    EXPECT_EQ(minkowski_dot({0, 1, 0, 0}, {0, 1, 0, 0}), -1.0);
    EXPECT_EQ(minkowski_dot({1, 1, 0, 0}, {1, 1, 0, 0}), 0.0);
    EXPECT_EQ(classify({1, 1, 0, 0}), Causal::Null);
    EXPECT_EQ(classify({1, 1e-6, 0, 0}), Causal::Timelike);
    EXPECT_EQ(classify({1, 2, 0, 0}), Causal::Spacelike);
}

TEST(Minkowski, BoostPreservesInterval) {
    FourVector v{1.3, -0.4, 2.0, 0.7};
    FourVector b = boost(v, {0.3, -0.5, 0.2});
    EXPECT_NEAR(minkowski_dot(b, b), minkowski_dot(v, v), 1e-13);
    FourVector back = boost(b, {-0.3, 0.5, -0.2});
    EXPECT_NEAR((back - v).euclidean_norm(), 0.0, 1e-13);
}

TEST(Minkowski, RestFrameBasisIsOrthonormal) {
    double g = 1.0 / std::sqrt(1 - 0.25 - 0.09);
    FourVector u{g, g * 0.5, g * -0.3, 0.0};
    auto e = rest_frame_basis(u);
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            double expect = a != b ? 0.0 : (a == 0 ? 1.0 : -1.0);
            EXPECT_NEAR(minkowski_dot(e[a], e[b]), expect, 1e-13) << a << b;
        }
}

TEST(Spline, ReproducesSamplesAndCubics) {
    std::vector<double> y;
    for (int i = 0; i < 9; ++i) {
        double x = 0.5 * i - 1.0;
        y.push_back(2 * x * x * x - x + 3);
    }
    UniformCubicSpline s(-1.0, 0.5, y);
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(s(-1.0 + 0.5 * i), y[i], 1e-13);
    // not-a-knot reproduces a global cubic exactly
    EXPECT_NEAR(s(0.3), 2 * 0.027 - 0.3 + 3, 1e-12);
    EXPECT_NEAR(s.derivative(0.3), 6 * 0.09 - 1, 1e-12);
    EXPECT_NEAR(s.second_derivative(0.3), 12 * 0.3, 1e-11);
}

TEST(Spline, FourthOrderInterpolationError) {
    double err[2];
    for (int k = 0; k < 2; ++k) {
        std::size_t n = k == 0 ? 41 : 81;
        Worldline w = circular(1.0, 0.5, 0.0, 8.0, n);
        double e = 0;
        for (int i = 0; i < 400; ++i) {
            double t = 0.5 + 7.0 * (i + 0.37) / 400.0;
            e = std::max(e, std::abs(w.position(t).x - std::cos(0.5 * t)));
        }
        err[k] = e;
    }
    double order = std::log2(err[0] / err[1]);
    EXPECT_NEAR(order, 4.0, 0.3);
}

TEST(ProperTime, StaticAndUniform) {
    Worldline st = Worldline::from_function(0.0, 10.0, 101, [](double t) { return FourVector{t, 0, 0, 0}; });
    EXPECT_NEAR(st.proper_time(10.0) - st.proper_time(0.0), 10.0, 1e-12);
    Worldline mv = Worldline::from_function(0.0, 10.0, 101, [](double t) { return FourVector{t, 0.6 * t, 0, 0}; });
    EXPECT_NEAR(mv.proper_time(10.0) - mv.proper_time(0.0), 8.0, 1e-12);
    EXPECT_THROW(mv.proper_time(10.5), RangeError);
    EXPECT_THROW(mv.proper_time(-0.1), RangeError);
}

TEST(ProperTime, CircularPeriod) {
    double R = 1.0, v = 0.5;
    double T = 2 * std::numbers::pi * R / v;
    Worldline w = circular(R, v, 0.0, T, 801);
    EXPECT_NEAR(w.proper_time(T) - w.proper_time(0.0), T * std::sqrt(0.75), 1e-9);
}

TEST(ProperTime, OriginAtLabTimeZero) {
    Worldline w = Worldline::from_function(-3.0, 5.0, 81, [](double t) { return FourVector{t, 0.6 * t, 0, 0}; });
    EXPECT_NEAR(w.proper_time(0.0), 0.0, 1e-13);
    EXPECT_NEAR(w.proper_time(-3.0), -2.4, 1e-12);
    EXPECT_NEAR(w.lambda_at_proper_time(2.4), 3.0, 1e-12);
}

TEST(ProperTime, ReparametrisationInvariance) {
    double R = 1.0, v = 0.5, om = v / R, g = 1.0 / std::sqrt(1 - v * v);
    double T = 10.0;
    Worldline lab = circular(R, v, 0.0, T, 1001);
    Worldline byTau = Worldline::from_function(0.0, T / g, 1001, [=](double tau) {
        double t = g * tau;
        return FourVector{t, R * std::cos(om * t), R * std::sin(om * t), 0.0};
    });
    double a = lab.proper_time(T) - lab.proper_time(0);
    double b = byTau.proper_time(T / g) - byTau.proper_time(0);
    EXPECT_LT(std::abs(a - b), 1e-8);
}

TEST(Derivatives, StaticAndUniform) {
    Worldline st = Worldline::from_function(0.0, 10.0, 101, [](double t) { return FourVector{t, 0, 0, 0}; });
    auto k = st.derivatives(5.0);
    EXPECT_NEAR((k.zdot - FourVector{1, 0, 0, 0}).euclidean_norm(), 0.0, 1e-12);
    EXPECT_NEAR(k.zddot.euclidean_norm(), 0.0, 1e-9);
    EXPECT_NEAR(k.zdddot.euclidean_norm(), 0.0, 1e-6);
    Worldline mv = Worldline::from_function(0.0, 10.0, 101, [](double t) { return FourVector{t, 0.6 * t, 0, 0}; });
    auto m = mv.derivatives(5.0);
    EXPECT_NEAR(m.zdot.t, 1.25, 1e-12);
    EXPECT_NEAR(m.zdot.x, 0.75, 1e-12);
    EXPECT_THROW(mv.derivatives(0.15), StencilError);
    EXPECT_THROW(mv.derivatives(9.85), StencilError);
    EXPECT_NO_THROW(mv.derivatives(0.2));
}

TEST(Derivatives, CircularKinematics) {
    double R = 1.0, v = 0.5, om = v / R, g = 1.0 / std::sqrt(1 - v * v);
    // dtau = 0.01 sampling
    Worldline w = circular(R, v, 0.0, 20.0, 1733);
    for (double t : {3.0, 7.7, 12.1}) {
        auto k = w.derivatives(t);
        EXPECT_NEAR(minkowski_dot(k.zdot, k.zdot), 1.0, 1e-12);
        EXPECT_LT(std::abs(minkowski_dot(k.zdot, k.zddot)), 1e-8);
        EXPECT_NEAR(k.zddot.spatial_norm(), g * g * v * v / R, 1e-5);
        FourVector z3{0, g * g * g * R * om * om * om * std::sin(om * t), -g * g * g * R * om * om * om * std::cos(om * t), 0};
        EXPECT_LT((k.zdddot - z3).euclidean_norm(), 1e-4 * z3.euclidean_norm());
    }
}

TEST(Derivatives, ChainRuleMatchesAnalyticOrbit) {
    double R = 1.2, v = 0.3, om = v / R;
    double t = 0.8;
    FourVector z1{1, -R * om * std::sin(om * t), R * om * std::cos(om * t), 0};
    FourVector z2{0, -R * om * om * std::cos(om * t), -R * om * om * std::sin(om * t), 0};
    FourVector z3{0, R * om * om * om * std::sin(om * t), -R * om * om * om * std::cos(om * t), 0};
    auto k = Worldline::chain_rule(z1, z2, z3);
    double g = 1 / std::sqrt(1 - v * v);
    EXPECT_NEAR(k.zdot.t, g, 1e-14);
    EXPECT_NEAR((k.zddot - z2 * (g * g)).euclidean_norm(), 0.0, 1e-14);
    EXPECT_NEAR((k.zdddot - z3 * (g * g * g)).euclidean_norm(), 0.0, 1e-14);
}

TEST(Worldline, RejectsInvalidInput) {
    EXPECT_THROW(Worldline::from_function(0, 1, 4, [](double t) { return FourVector{t, 0, 0, 0}; }),
                 InvalidArgument);
    EXPECT_THROW(Worldline::from_function(0, 1, 10, [](double t) { return FourVector{t, 1.5 * t, 0, 0}; }),
                 InvalidArgument);
    EXPECT_THROW(Worldline::from_function(0, 1, 10, [](double t) { return FourVector{-t, 0, 0, 0}; }),
                 InvalidArgument);
}

TEST(Worldline, CsvRoundTrip) {
    Worldline w = circular(1.0, 0.4, -1.0, 3.0, 33);
    std::stringstream ss;
    w.write_csv(ss);
    EXPECT_EQ(ss.str().substr(0, 15), "lambda,t,x,y,z\n");
    Worldline r = Worldline::read_csv(ss);
    ASSERT_EQ(r.size(), w.size());
    EXPECT_EQ(r.hash(), w.hash());
}

TEST(SourceLaw, HamiltonJacobiConstantMass) {
    std::vector<double> m(20, 2.0);
    auto law = SourceLaw::hamilton_jacobi(1.0, 0.0, 0.5, m);
    EXPECT_NEAR(law.S(3.3), -6.6, 1e-12);
    EXPECT_NEAR(law.S_dot(1.1), -2.0, 1e-12);
}
