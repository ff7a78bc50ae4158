#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "dsol/errors.hpp"

namespace dsol {

struct GaussLegendreRule {
    std::vector<double> nodes;    // ascending, in (-1, 1)
    std::vector<double> weights;
};

// Newton iteration on P_n with the Tricomi initial guess.
inline GaussLegendreRule gauss_legendre(int n) {
    if (n < 1) throw InvalidArgument("gauss_legendre: order must be >= 1");
    GaussLegendreRule rule;
    rule.nodes.assign(n, 0.0);
    rule.weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

namespace detail {
inline constexpr double gl5_x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                    0.5384693101056831, 0.9061798459386640};
inline constexpr double gl5_w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
}  // namespace detail

template <class F>
double integrate_gl5(F&& f, double a, double b) {
    double half = 0.5 * (b - a), mid = 0.5 * (a + b), sum = 0.0;
    for (int k = 0; k < 5; ++k) sum += detail::gl5_w[k] * f(mid + half * detail::gl5_x[k]);
    return sum * half;
}

}  // namespace dsol
