#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dsol/spacetime.hpp"

namespace dsol {

enum class GreenKind { Retarded, Advanced, Antisymmetric, Symmetric };

inline const char* to_string(GreenKind k) {
    switch (k) {
        case GreenKind::Retarded: return "retarded";
        case GreenKind::Advanced: return "advanced";
        case GreenKind::Antisymmetric: return "antisymmetric";
        case GreenKind::Symmetric: return "symmetric";
    }
    return "?";
}

inline GreenKind green_kind_from_string(const std::string& s) {
    if (s == "retarded") return GreenKind::Retarded;
    if (s == "advanced") return GreenKind::Advanced;
    if (s == "antisymmetric") return GreenKind::Antisymmetric;
    if (s == "symmetric") return GreenKind::Symmetric;
    throw InvalidArgument("unknown green kind: " + s);
}

struct LightconeSolution {
    GreenKind kind;
    double lambda;
    double tau;
    FourVector z, zdot;
    double rho;
};

namespace detail {
inline double cone_f(const Worldline& w, const FourVector& x, double lam, double sigma) {
    FourVector z = w.position(lam);
    FourVector d = x - z;
    return d.t - sigma * d.spatial_norm();
}
}  // namespace detail

// Root of x.t - z.t(lambda) -/+ |x - z(lambda)| on the sampled worldline.
inline LightconeSolution lightcone_intersect(const Worldline& w, const FourVector& x, GreenKind kind) {
    if (kind != GreenKind::Retarded && kind != GreenKind::Advanced)
        throw InvalidArgument("lightcone_intersect: kind must be retarded or advanced");
    const double sigma = kind == GreenKind::Retarded ? 1.0 : -1.0;
    const auto& zs = w.samples();
    const std::size_t n = zs.size();
    auto f_sample = [&](std::size_t i) {
        FourVector d = x - zs[i];
        return d.t - sigma * d.spatial_norm();
    };
    double f0 = f_sample(0), f1 = f_sample(n - 1);
    if (!(f0 >= 0.0 && f1 <= 0.0)) {
        throw WorldlineTooShort(std::string("lightcone_intersect: ") + to_string(kind) +
                                    " cone not bracketed (f(first)=" + fmt(f0) + ", f(last)=" + fmt(f1) + ")",
                                f0, f1);
    }
    // f decreases with lambda: find the sample interval holding the sign change
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        (f_sample(mid) > 0.0 ? lo : hi) = mid;
    }
    double a = w.lambda_at(lo), b = w.lambda_at(hi);
    double fa = f_sample(lo), fb = f_sample(hi);
    double lam;
    if (fa == 0.0) lam = a;
    else if (fb == 0.0) lam = b;
    else {
        lam = a + fa / (fa - fb) * (b - a);
        for (int it = 0; it < 100; ++it) {
            FourVector z = w.position(lam);
            FourVector d = x - z;
            double r = d.spatial_norm();
            double f = d.t - sigma * r;
            if (f == 0.0) break;
            (f > 0.0 ? a : b) = lam;
            FourVector zp = w.tangent(lam);
            double df = -zp.t;
            if (r > 0.0) df += sigma * (d.x * zp.x + d.y * zp.y + d.z * zp.z) / r;
            double next = df != 0.0 ? lam - f / df : 0.5 * (a + b);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            double step = std::abs(next - lam);
            lam = next;
            if (step <= 4e-16 * std::max(1.0, std::abs(lam)) || b - a <= 4e-16 * std::max(1.0, std::abs(a))) break;
        }
    }
    LightconeSolution sol;
    sol.kind = kind;
    sol.lambda = lam;
    sol.z = w.position(lam);
    sol.zdot = w.four_velocity(lam);
    sol.tau = w.proper_time(lam);
    sol.rho = std::abs(minkowski_dot(x - sol.z, sol.zdot));
    double scale = std::max({1.0, std::abs(x.t), x.spatial_norm(), std::abs(sol.z.t)});
    double resid = std::abs(detail::cone_f(w, x, lam, sigma));
    if (resid > 1e-10 * scale)
        throw Error("lightcone_intersect: root not converged (|f|=" + fmt(resid) + ")");
    return sol;
}

inline double green_weight(const LightconeSolution& sol, double eps_rho = 1e-6) {
    if (sol.rho < eps_rho)
        throw NearSingularity("green_weight: rho=" + fmt(sol.rho) + " below threshold; use near_field_expansion",
                              sol.rho);
    return 1.0 / (4.0 * std::numbers::pi * sol.rho);
}

}  // namespace dsol
