#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "dsol/errors.hpp"

namespace dsol {

struct IntegratorConfig {
    double atol = 1e-8;
    double rtol = 1e-8;
    double dt_out = 0.01;   // spacing of the resampled output
    double dt_min = 1e-6;   // below this the trajectory is flagged node-stalled
    double eps_node = 1e-6; // relative amplitude R / max R that counts as "near a node"
    double h0 = 1e-3;
};

enum class TrajectoryStatus { Completed, NodeStalled };

inline const char* to_string(TrajectoryStatus s) {
    return s == TrajectoryStatus::Completed ? "completed" : "node-stalled";
}

struct IntegratorStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t node_shrinks = 0;
    double min_node_ratio = std::numeric_limits<double>::infinity();
};

template <std::size_t D>
struct OdeSolution {
    std::vector<double> times;
    std::vector<std::array<double, D>> states;
    TrajectoryStatus status = TrajectoryStatus::Completed;
    IntegratorStats stats;
};

// Dormand-Prince 5(4) with FSAL, landing exactly on the output grid.
// rhs(t, y, dydt, node_ratio) returns false when the stage point is too close to a node.
template <std::size_t D, class F>
OdeSolution<D> integrate_dopri(F&& rhs, std::array<double, D> y, double t0, double t1, const IntegratorConfig& cfg) {
    using S = std::array<double, D>;
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    if (!(cfg.dt_out > 0)) throw InvalidArgument("integrate: dt_out must be positive");
    OdeSolution<D> sol;
    const double span = t1 - t0;
    const double dir = span >= 0 ? 1.0 : -1.0;
    std::size_t n_out = static_cast<std::size_t>(std::llround(std::abs(span) / cfg.dt_out));
    if (std::abs(static_cast<double>(n_out) * cfg.dt_out - std::abs(span)) > 1e-9 * std::max(1.0, std::abs(span)))
        n_out = static_cast<std::size_t>(std::ceil(std::abs(span) / cfg.dt_out));
    auto out_time = [&](std::size_t k) {
        return k >= n_out ? t1 : t0 + dir * cfg.dt_out * static_cast<double>(k);
    };

    auto eval = [&](double t, const S& state, S& d) {
        double ratio = 1.0;
        bool ok = rhs(t, state, d, ratio);
        if (ok) sol.stats.min_node_ratio = std::min(sol.stats.min_node_ratio, ratio);
        return ok;
    };

    double t = t0;
    sol.times.push_back(t);
    sol.states.push_back(y);
    S k1, k2, k3, k4, k5, k6, k7, tmp, y5;
    if (!eval(t, y, k1)) {
        sol.status = TrajectoryStatus::NodeStalled;
        return sol;
    }
    double h = dir * std::min(cfg.h0, cfg.dt_out);
    auto stage = [&](const std::initializer_list<std::pair<double, const S*>>& terms, double hs) {
        for (std::size_t i = 0; i < D; ++i) {
            double acc = 0.0;
            for (const auto& [c, k] : terms) acc += c * (*k)[i];
            tmp[i] = y[i] + hs * acc;
        }
        return tmp;
    };

    for (std::size_t k = 1; k <= n_out; ++k) {
        const double target = out_time(k);
        while (true) {
            double remaining = target - t;
            if (std::abs(remaining) <= 1e-13 * std::max(1.0, std::abs(target))) {
                t = target;
                break;
            }
            bool truncated = std::abs(h) >= std::abs(remaining);
            double hs = truncated ? remaining : h;
            bool ok = eval(t + c2 * hs, stage({{a21, &k1}}, hs), k2) &&
                      eval(t + c3 * hs, stage({{a31, &k1}, {a32, &k2}}, hs), k3) &&
                      eval(t + c4 * hs, stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}, hs), k4) &&
                      eval(t + c5 * hs, stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, hs), k5) &&
                      eval(t + hs, stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, hs), k6);
            if (ok) {
                y5 = stage({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, hs);
                ok = eval(t + hs, y5, k7);
            }
            if (!ok) {
                ++sol.stats.node_shrinks;
                h = 0.5 * hs;
                if (std::abs(h) < cfg.dt_min) {
                    sol.status = TrajectoryStatus::NodeStalled;
                    return sol;
                }
                continue;
            }
            double err = 0.0;
            for (std::size_t i = 0; i < D; ++i) {
                double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
                double sc = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
                err = std::max(err, std::abs(e) / sc);
            }
            double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (err <= 1.0) {
                ++sol.stats.accepted;
                t = truncated ? target : t + hs;
                y = y5;
                k1 = k7;
                double hn = hs * fac;
                if (!(truncated && std::abs(h) > std::abs(hn))) h = hn;
                if (truncated) break;
            } else {
                ++sol.stats.rejected;
                h = hs * std::max(0.2, fac);
                if (std::abs(h) < cfg.dt_min) {
                    sol.status = TrajectoryStatus::NodeStalled;
                    return sol;
                }
            }
        }
        sol.times.push_back(target);
        sol.states.push_back(y);
    }
    return sol;
}

}  // namespace dsol
