#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dsol/cauchy.hpp"
#include "dsol/fieldsynth.hpp"

using namespace dsol;
using std::numbers::pi;

namespace {
const double lambda0 = 2 * pi;

cplx wavelet(const FourVector& x) { return stationary_wavelet(1.0, 1.0, x.t, x.spatial_norm()); }

CauchyData wavelet_data(const Vec3& c, double R, double h) {
    Box3 b = Box3::centred(c, R + 4 * h, h);
    return record_cauchy_data(wavelet, 0.0, b, lambda0, 1, "stationary wavelet g=1 w=1");
}
}  // namespace

TEST(CauchyRecord, MatchesClosedFormAndPhaseDerivative) {
    Box3 b = Box3::centred({0, 0, 0}, 2.0, lambda0 / 16);
    auto d = record_cauchy_data(wavelet, 1.5, b, lambda0);
    EXPECT_TRUE(d.warnings.empty());
    double worst = 0;
    for (std::size_t n = 0; n < b.size(); ++n) {
        std::size_t k = n % b.nz, j = (n / b.nz) % b.ny, i = n / (b.nz * b.ny);
        Vec3 p = b.node(i, j, k);
        cplx u = wavelet({1.5, p.x, p.y, p.z});
        EXPECT_EQ(d.u[n], u);
        worst = std::max(worst, std::abs(d.dtu[n] - cplx(0, -1) * u));
    }
    // delta^4/30 with delta = h/4, amplitude 1/(4 pi)
    EXPECT_LT(worst, 1e-5);
}

TEST(CauchyRecord, LienardWiechertRouteAgrees) {
    Worldline w = Worldline::from_function(-30, 30, 601, [](double t) { return FourVector{t, 0, 0, 0}; });
    auto law = SourceLaw::harmonic(1.0, 1.0);
    Box3 b = Box3::centred({0.3, 0, 0}, 1.5, 0.5);
    auto lw = record_cauchy_data([&](const FourVector& x) { return antisymmetric_field(w, law, x).value; }, 0.0, b,
                                 lambda0);
    auto cf = record_cauchy_data(wavelet, 0.0, b, lambda0);
    for (std::size_t n = 0; n < b.size(); ++n) {
        EXPECT_LT(std::abs(lw.u[n] - cf.u[n]), 1e-10);
        EXPECT_LT(std::abs(lw.dtu[n] - cf.dtu[n]), 1e-10);
    }
}

TEST(CauchyRecord, CoarseGridWarning) {
    Box3 b = Box3::centred({0, 0, 0}, 2.0, lambda0 / 6);
    auto d = record_cauchy_data(wavelet, 0.0, b, lambda0);
    ASSERT_EQ(d.warnings.size(), 1u);
    EXPECT_NE(d.warnings[0].find("per wavelength"), std::string::npos);
}

TEST(CauchyRecord, MaskPropagates) {
    Box3 b = Box3::centred({0, 0, 0}, 1.0, 0.5);
    auto d = record_cauchy_data(
        [](const FourVector& x) -> cplx {
            if (x.x > 0.2) throw RangeError("outside");
            return 1.0;
        },
        0.0, b, lambda0);
    EXPECT_GT(d.masked(), 0u);
    EXPECT_LT(d.masked(), b.size());
}

TEST(Kirchhoff, StationaryWaveletReconstruction) {
    double h = lambda0 / 16;
    auto d = wavelet_data({1, 0, 0}, 5.0, h);
    FourVector x{5.0, 1.0, 0, 0};
    cplx ref = wavelet(x);
    cplx u = kirchhoff_reconstruct(d, x, 64, 128);
    EXPECT_LT(std::abs(u - ref) / std::abs(ref), 1e-3);
}

TEST(Kirchhoff, QuadratureRefinementConverges) {
    double h = lambda0 / 16;
    auto d = wavelet_data({1, 0, 0}, 5.0, h);
    FourVector x{5.0, 1.0, 0, 0};
    cplx ref = wavelet(x);
    auto err = [&](int nt) { return std::abs(kirchhoff_reconstruct(d, x, nt, 2 * nt) - ref) / std::abs(ref); };
    // grid-sampling floor: about 8e-6 relative at h = lambda/16
    double floor = err(64);
    double prev = 1e300;
    for (int nt : {1, 2, 4, 8, 16, 32}) {
        double e = err(nt);
        if (prev > 5 * floor) EXPECT_LT(e, prev) << nt;
        else EXPECT_LT(e, 5 * floor) << nt;
        prev = e;
    }
    EXPECT_LT(floor, 1e-4);
}

TEST(Kirchhoff, ShrinkingSphereGivesData) {
    double h = 0.25;
    auto d = wavelet_data({0.4, 0.1, 0.2}, 0.5, h);
    FourVector at{0.0, 0.4, 0.1, 0.2};
    EXPECT_LT(std::abs(kirchhoff_reconstruct(d, at) - wavelet(at)), 1e-6);
    FourVector later{1e-6, 0.4, 0.1, 0.2};
    EXPECT_LT(std::abs(kirchhoff_reconstruct(d, later) - wavelet(later)), 1e-5);
}

TEST(Kirchhoff, LinearityAndZeroData) {
    double h = 0.4;
    Box3 b = Box3::centred({0, 0, 0}, 4.0, h);
    auto f1 = [](const FourVector& x) { return stationary_wavelet(1.0, 1.0, x.t, x.spatial_norm()); };
    auto f2 = [](const FourVector& x) { return std::polar(1.0, x.x - x.t); };
    auto d1 = record_cauchy_data(f1, 0.0, b, lambda0);
    auto d2 = record_cauchy_data(f2, 0.0, b, lambda0);
    auto ds = record_cauchy_data([&](const FourVector& x) { return f1(x) + f2(x); }, 0.0, b, lambda0);
    FourVector x{2.0, 0.3, -0.2, 0.1};
    cplx a = kirchhoff_reconstruct(d1, x, 24, 48) + kirchhoff_reconstruct(d2, x, 24, 48);
    EXPECT_LT(std::abs(kirchhoff_reconstruct(ds, x, 24, 48) - a), 1e-12);
    auto z = record_cauchy_data([](const FourVector&) { return cplx(0.0); }, 0.0, b, lambda0);
    EXPECT_EQ(kirchhoff_reconstruct(z, x, 24, 48), cplx(0.0));
    // plane wave is an exact null solution too
    EXPECT_LT(std::abs(kirchhoff_reconstruct(d2, x, 24, 48) - f2(x)), 1e-4);
}

TEST(Kirchhoff, SphereOutsideBoxReportsRequiredBox) {
    auto d = wavelet_data({0, 0, 0}, 1.0, 0.25);
    try {
        kirchhoff_reconstruct(d, {3.0, 0, 0, 0});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("need ["), std::string::npos);
    }
    EXPECT_THROW(kirchhoff_reconstruct(d, {-1.0, 0, 0, 0}), InvalidArgument);
}

TEST(Kirchhoff, RetardedSourceSwitchedOnLater) {
    // source exists only from t=1; Cauchy data on t=0
    Worldline w = Worldline::from_function(1.0, 30, 291, [](double t) { return FourVector{t, 0, 0, 0}; });
    auto law = SourceLaw::harmonic(1.0, 1.0);
    LwOptions o;
    o.cone_exit = ConeExit::Vanish;
    Box3 b = Box3::centred({0, 0, 0}, 3.0, 0.5);
    auto ret = record_cauchy_data([&](const FourVector& x) { return lw_field(w, law, x, GreenKind::Retarded, o); }, 0.0,
                                  b, lambda0);
    auto anti = record_cauchy_data(
        [&](const FourVector& x) { return antisymmetric_field(w, law, x, 0.05, o).value; }, 0.0, b, lambda0);
    double rmax = 0, amax = 0;
    for (std::size_t n = 0; n < b.size(); ++n) {
        rmax = std::max(rmax, std::abs(ret.u[n]) + std::abs(ret.dtu[n]));
        amax = std::max(amax, std::abs(anti.u[n]));
    }
    EXPECT_EQ(rmax, 0.0);
    EXPECT_GT(amax, 1e-3);
    EXPECT_EQ(kirchhoff_reconstruct(ret, {1.5, 0, 0, 0}, 16, 32), cplx(0.0));
}

TEST(CauchyIo, BinaryRoundTrip) {
    auto d = wavelet_data({0, 0, 0}, 0.5, 0.5);
    d.mask[3] = 1;
    std::string p = ::testing::TempDir() + "c.bin";
    write_cauchy_binary(d, p);
    auto e = read_cauchy_binary(p);
    EXPECT_EQ(e.u, d.u);
    EXPECT_EQ(e.dtu, d.dtu);
    EXPECT_EQ(e.mask, d.mask);
    EXPECT_EQ(e.source_hash, d.source_hash);
    EXPECT_EQ(e.box.nx, d.box.nx);
    EXPECT_EQ(e.t_in, d.t_in);
}
