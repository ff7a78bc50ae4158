#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dsol/errors.hpp"
#include "dsol/fft.hpp"
#include "dsol/integrator.hpp"
#include "dsol/parallel.hpp"
#include "dsol/spacetime.hpp"
#include "dsol/wavefunction.hpp"

namespace dsol {

template <class M>
concept GuidanceModel = requires(const M& m, double t, double x) {
    { m.jet(t, x) } -> std::same_as<PsiJet>;
    { m.mass() } -> std::convertible_to<double>;
    { m.amplitude_bound(t) } -> std::convertible_to<double>;
};

// psi_TR(t, x) = conj(psi(-t, x)), whose guidance velocity is -v(-t, x).
template <GuidanceModel M>
struct TimeReversed {
    const M& model;
    PsiJet jet(double t, double x) const {
        PsiJet j = model.jet(-t, x);
        return {std::conj(j.psi), std::conj(j.dpsi), std::conj(j.d2psi)};
    }
    double mass() const { return model.mass(); }
    double amplitude_bound(double t) const { return model.amplitude_bound(-t); }
};

// v = (dS/dx - e A)/m
template <GuidanceModel M>
double guidance_velocity_nr(const M& model, double t, double x, double e = 0.0, double A = 0.0) {
    PsiJet j = model.jet(t, x);
    double R = std::abs(j.psi);
    if (R < default_eps_node) throw NodeError("guidance_velocity_nr: at a node", R);
    return ((j.dpsi / j.psi).imag() - e * A) / model.mass();
}

// Same velocity from a centred difference of the unwrapped phase.
template <GuidanceModel M>
double guidance_velocity_nr_phase(const M& model, double t, double x, double h = 1e-5) {
    cplx a = model.jet(t, x + h).psi, b = model.jet(t, x - h).psi;
    if (std::abs(a) < default_eps_node || std::abs(b) < default_eps_node)
        throw NodeError("guidance_velocity_nr_phase: at a node", std::min(std::abs(a), std::abs(b)));
    return std::arg(a / b) / (2.0 * h) / model.mass();
}

struct Trajectory {
    double z0 = 0;
    std::vector<double> t, x;
    TrajectoryStatus status = TrajectoryStatus::Completed;
    IntegratorStats stats;

    // Embedded on the x axis; samples are reordered to increasing time.
    Worldline worldline() const {
        if (t.size() < 5) throw InvalidArgument("Trajectory: too few samples for a worldline");
        std::vector<FourVector> s(t.size());
        bool rev = t.back() < t.front();
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::size_t k = rev ? t.size() - 1 - i : i;
            s[i] = {t[k], x[k], 0.0, 0.0};
        }
        double t0 = s.front().t;
        double dt = (s.back().t - t0) / static_cast<double>(s.size() - 1);
        return Worldline(t0, dt, std::move(s));
    }
};

namespace detail {
template <std::size_t D>
void copy_solution(const OdeSolution<D>& sol, std::size_t comp, Trajectory& tr) {
    tr.t = sol.times;
    tr.x.resize(sol.states.size());
    for (std::size_t i = 0; i < sol.states.size(); ++i) tr.x[i] = sol.states[i][comp];
    tr.status = sol.status;
    tr.stats = sol.stats;
}
}  // namespace detail

template <GuidanceModel M>
Trajectory integrate_trajectory(const M& model, double z0, double t0, double t1, const IntegratorConfig& cfg = {}) {
    auto rhs = [&](double t, const std::array<double, 1>& y, std::array<double, 1>& d, double& ratio) {
        PsiJet j = model.jet(t, y[0]);
        double R = std::abs(j.psi);
        ratio = R / model.amplitude_bound(t);
        if (ratio < cfg.eps_node || R < default_eps_node) return false;
        d[0] = (j.dpsi / j.psi).imag() / model.mass();
        return true;
    };
    auto sol = integrate_dopri<1>(rhs, {z0}, t0, t1, cfg);
    Trajectory tr;
    tr.z0 = z0;
    detail::copy_solution(sol, 0, tr);
    return tr;
}

// Uniform double in [0,1) from stream (seed ^ index); bit conversion done by hand for portability.
inline double stream_uniform(std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 gen(seed ^ index);
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Trapezoid CDF of |psi(t0,.)|^2 on a uniform table; quantile() inverts it linearly within a cell.
class BornTable {
public:
    template <GuidanceModel M>
    BornTable(const M& model, double t0, std::pair<double, double> range, std::size_t table_size = 1 << 16)
        : lo_(range.first), dx_((range.second - range.first) / static_cast<double>(table_size)),
          cdf_(table_size + 1, 0.0) {
        if (table_size < 2 || !(range.second > range.first)) throw InvalidArgument("BornTable: bad range or size");
        double prev = std::norm(model.jet(t0, lo_).psi);
        for (std::size_t i = 1; i <= table_size; ++i) {
            double cur = std::norm(model.jet(t0, lo_ + dx_ * static_cast<double>(i)).psi);
            cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur) * dx_;
            prev = cur;
        }
        double total = cdf_.back();
        for (auto& c : cdf_) c /= total;
    }

    double quantile(double u) const {
        const std::size_t n = cdf_.size() - 1;
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        std::size_t i = it == cdf_.begin() ? 0 : static_cast<std::size_t>(it - cdf_.begin()) - 1;
        if (i >= n) i = n - 1;
        double span = cdf_[i + 1] - cdf_[i];
        double f = span > 0 ? (u - cdf_[i]) / span : 0.5;
        return lo_ + dx_ * (static_cast<double>(i) + f);
    }

private:
    double lo_, dx_;
    std::vector<double> cdf_;
};

template <GuidanceModel M>
std::vector<double> sample_born(const M& model, double t0, std::size_t n, std::uint64_t seed,
                                std::pair<double, double> range, std::size_t table_size = 1 << 16) {
    if (n < 1) throw InvalidArgument("sample_born: N must be >= 1");
    BornTable table(model, t0, range, table_size);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = table.quantile(stream_uniform(seed, k));
    return out;
}

inline std::vector<double> sample_born(const GaussianSuperposition& model, double t0, std::size_t n,
                                       std::uint64_t seed) {
    return sample_born(model, t0, n, seed, model.support(t0));
}

struct TrajectoryEnsemble {
    std::uint64_t seed = 0;
    std::uint64_t model_hash = 0;
    IntegratorConfig config;
    std::vector<double> initial;
    std::vector<Trajectory> trajectories;
    std::size_t node_stalled = 0;
    std::size_t rejected_steps = 0;
    double min_node_ratio = std::numeric_limits<double>::infinity();
};

template <GuidanceModel M>
TrajectoryEnsemble run_ensemble(const M& model, std::vector<double> initial, double t0, double t1,
                                const IntegratorConfig& cfg, unsigned threads, std::uint64_t seed,
                                std::uint64_t model_hash) {
    TrajectoryEnsemble ens;
    ens.seed = seed;
    ens.model_hash = model_hash;
    ens.config = cfg;
    ens.initial = std::move(initial);
    ens.trajectories.resize(ens.initial.size());
    parallel_for(ens.initial.size(), threads,
                 [&](std::size_t i) { ens.trajectories[i] = integrate_trajectory(model, ens.initial[i], t0, t1, cfg); });
    for (const auto& tr : ens.trajectories) {
        if (tr.status == TrajectoryStatus::NodeStalled) ++ens.node_stalled;
        ens.rejected_steps += tr.stats.rejected;
        ens.min_node_ratio = std::min(ens.min_node_ratio, tr.stats.min_node_ratio);
    }
    return ens;
}

// Number of (output time, neighbour pair) events where the order of trajectories changes.
inline std::size_t count_crossings(const TrajectoryEnsemble& ens) {
    std::vector<std::size_t> order(ens.trajectories.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ens.initial[a] < ens.initial[b]; });
    std::size_t crossings = 0;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& a = ens.trajectories[order[k - 1]];
        const auto& b = ens.trajectories[order[k]];
        std::size_t n = std::min(a.x.size(), b.x.size());
        for (std::size_t i = 0; i < n; ++i)
            if (a.x[i] > b.x[i]) ++crossings;
    }
    return crossings;
}

// Two-particle psi propagated on a lattice; values between nodes and snapshots by
// spectral interpolation and a partial split step from the last snapshot.
class GridGuidance2D {
public:
    struct Eval {
        cplx psi, d1, d2;
        double max_amplitude;
    };

    GridGuidance2D(GridWavefunction2D initial, double dt_grid, unsigned threads = 1)
        : init_(std::move(initial)), dt_(dt_grid), threads_(threads), fft_(init_.axis.n),
          step_(init_.axis, init_.mass, init_.V, dt_grid, threads) {
        k_ = fft_.wavenumbers(init_.axis.dx);
        reset();
    }

    double mass() const { return init_.mass; }
    double start_time() const { return init_.t; }

    Eval eval(double t, double x1, double x2) {
        prepare(t);
        const std::size_t n = init_.axis.n;
        std::vector<cplx> e2(n);
        for (std::size_t j = 0; j < n; ++j) e2[j] = std::polar(1.0, k_[j] * (x2 - init_.axis.x0));
        cplx psi = 0.0, d1 = 0.0, d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const cplx* row = coef_.data() + i * n;
            cplx r = 0.0, rd = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                cplx v = row[j] * e2[j];
                r += v;
                rd += cplx(0.0, k_[j]) * v;
            }
            cplx e1 = std::polar(1.0, k_[i] * (x1 - init_.axis.x0));
            psi += e1 * r;
            d1 += cplx(0.0, k_[i]) * e1 * r;
            d2 += e1 * rd;
        }
        return {psi, d1, d2, max_amp_};
    }

private:
    void reset() {
        snap_ = init_.psi;
        n_snap_ = 0;
        cached_ = false;
    }

    void prepare(double t) {
        if (cached_ && t == t_cache_) return;
        if (t < init_.t) throw RangeError("GridGuidance2D: time before the initial state");
        auto snap_time = [&](std::size_t k) { return init_.t + dt_ * static_cast<double>(k); };
        if (t < snap_time(n_snap_)) reset();
        while (t >= snap_time(n_snap_ + 1)) {
            step_.step(snap_);
            ++n_snap_;
        }
        coef_ = snap_;
        double delta = t - snap_time(n_snap_);
        if (delta > 0.0) {
            SplitStep2D partial(init_.axis, init_.mass, init_.V, delta, threads_);
            partial.step(coef_);
        }
        max_amp_ = 0.0;
        for (const auto& v : coef_) max_amp_ = std::max(max_amp_, std::abs(v));
        detail::fft2(fft_, coef_, init_.axis.n, false, threads_);
        double s = 1.0 / static_cast<double>(init_.axis.n * init_.axis.n);
        for (auto& v : coef_) v *= s;
        t_cache_ = t;
        cached_ = true;
    }

    GridWavefunction2D init_;
    double dt_;
    unsigned threads_;
    Fft fft_;
    SplitStep2D step_;
    std::vector<double> k_;
    std::vector<cplx> snap_, coef_;
    std::size_t n_snap_ = 0;
    double t_cache_ = 0, max_amp_ = 0;
    bool cached_ = false;
};

// Synchronised state of N particles at one value of the common parameter.
struct GuidanceState {
    double lambda = 0;
    std::vector<FourVector> z;
    std::vector<FourVector> zdot;
    std::vector<double> M;
};

inline GuidanceState guidance_state(GridGuidance2D& g, double t, double z1, double z2) {
    auto e = g.eval(t, z1, z2);
    if (std::abs(e.psi) < default_eps_node) throw NodeError("guidance_state: at a node", std::abs(e.psi));
    double v[2] = {(e.d1 / e.psi).imag() / g.mass(), (e.d2 / e.psi).imag() / g.mass()};
    GuidanceState s;
    s.lambda = t;
    s.z = {{t, z1, 0, 0}, {t, z2, 0, 0}};
    for (double vi : v) {
        if (!(std::abs(vi) < 1.0)) throw SuperluminalRegime("guidance_state: |v| >= 1");
        double gam = 1.0 / std::sqrt(1.0 - vi * vi);
        s.zdot.push_back({gam, gam * vi, 0, 0});
        s.M.push_back(g.mass());
    }
    return s;
}

// Both particles advanced with the common lab time.
inline std::pair<Trajectory, Trajectory> integrate_many_body(GridGuidance2D& g, double z1, double z2, double t0,
                                                             double t1, const IntegratorConfig& cfg = {}) {
    if (t1 < t0) throw InvalidArgument("integrate_many_body: only forward integration is supported");
    auto rhs = [&](double t, const std::array<double, 2>& y, std::array<double, 2>& d, double& ratio) {
        auto e = g.eval(t, y[0], y[1]);
        double R = std::abs(e.psi);
        ratio = R / e.max_amplitude;
        if (ratio < cfg.eps_node || R < default_eps_node) return false;
        d[0] = (e.d1 / e.psi).imag() / g.mass();
        d[1] = (e.d2 / e.psi).imag() / g.mass();
        return true;
    };
    auto sol = integrate_dopri<2>(rhs, {z1, z2}, t0, t1, cfg);
    std::pair<Trajectory, Trajectory> out;
    out.first.z0 = z1;
    out.second.z0 = z2;
    detail::copy_solution(sol, 0, out.first);
    detail::copy_solution(sol, 1, out.second);
    return out;
}

// Free two-particle state sum_k A_k(t, x1) B_k(t, x2) with analytic Gaussian factors. Unlike the lattice
// route it has no periodic box and integrates in either time direction.
class ProductSum2 {
public:
    ProductSum2(std::vector<GaussianSuperposition> a, std::vector<GaussianSuperposition> b)
        : a_(std::move(a)), b_(std::move(b)) {
        if (a_.empty() || a_.size() != b_.size()) throw InvalidArgument("ProductSum2: factor lists must match");
        for (std::size_t k = 0; k < a_.size(); ++k)
            if (a_[k].mass() != a_[0].mass() || b_[k].mass() != a_[0].mass())
                throw InvalidArgument("ProductSum2: factors must share one mass");
    }
    double mass() const { return a_[0].mass(); }
    struct Eval {
        cplx psi, d1, d2;
        double bound;
    };
    Eval eval(double t, double x1, double x2) const {
        Eval e{0.0, 0.0, 0.0, 0.0};
        for (std::size_t k = 0; k < a_.size(); ++k) {
            PsiJet ja = a_[k].jet(t, x1), jb = b_[k].jet(t, x2);
            e.psi += ja.psi * jb.psi;
            e.d1 += ja.dpsi * jb.psi;
            e.d2 += ja.psi * jb.dpsi;
            e.bound += a_[k].amplitude_bound(t) * b_[k].amplitude_bound(t);
        }
        return e;
    }

private:
    std::vector<GaussianSuperposition> a_, b_;
};

inline std::pair<Trajectory, Trajectory> integrate_two_body(const ProductSum2& m, double z1, double z2, double t0,
                                                            double t1, const IntegratorConfig& cfg = {}) {
    auto rhs = [&](double t, const std::array<double, 2>& y, std::array<double, 2>& d, double& ratio) {
        auto e = m.eval(t, y[0], y[1]);
        double R = std::abs(e.psi);
        ratio = R / e.bound;
        if (ratio < cfg.eps_node || R < default_eps_node) return false;
        d[0] = (e.d1 / e.psi).imag() / m.mass();
        d[1] = (e.d2 / e.psi).imag() / m.mass();
        return true;
    };
    auto sol = integrate_dopri<2>(rhs, {z1, z2}, t0, t1, cfg);
    std::pair<Trajectory, Trajectory> out;
    out.first.z0 = z1;
    out.second.z0 = z2;
    detail::copy_solution(sol, 0, out.first);
    detail::copy_solution(sol, 1, out.second);
    return out;
}

// zdot^mu = -(d^mu S + e A^mu)/sqrt((dS + eA)^2); A given by contravariant components.
inline FourVector relativistic_guidance_velocity(const PolarFields& f, const FourVector& A = {}, double e = 0.0) {
    if (!f.dS) throw InvalidArgument("relativistic_guidance_velocity: covariant phase gradient required");
    if (f.boxR_over_R) {
        double m2q = f.mass * f.mass + *f.boxR_over_R;
        if (!(m2q > 0)) throw SuperluminalRegime("relativistic_guidance_velocity: m^2 + Q = " + fmt(m2q));
    }
    FourVector p = *f.dS + flip_index(A) * e;  // covariant
    double p2 = minkowski_dot(p, p);
    if (!(p2 > 0)) throw SuperluminalRegime("relativistic_guidance_velocity: (dS + eA)^2 = " + fmt(p2));
    return flip_index(p) * (-1.0 / std::sqrt(p2));
}

// Lab-time integration of the relativistic guidance law for a 1D model exposing polar(t, x).
template <class RelModel>
Trajectory integrate_relativistic(const RelModel& model, double z0, double t0, double t1,
                                  const IntegratorConfig& cfg = {}) {
    auto rhs = [&](double t, const std::array<double, 1>& y, std::array<double, 1>& d, double& ratio) {
        ratio = 1.0;
        FourVector u = relativistic_guidance_velocity(model.polar(t, y[0]));
        d[0] = u.x / u.t;
        return true;
    };
    auto sol = integrate_dopri<1>(rhs, {z0}, t0, t1, cfg);
    Trajectory tr;
    tr.z0 = z0;
    detail::copy_solution(sol, 0, tr);
    return tr;
}

}  // namespace dsol
