#include <swips/verify.hpp>

#include <swips/pde.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace swips;

namespace {

MacroParams make(double eps, double ups, std::array<double, 4> rho)
{
    return {eps, ups, ReservoirDensities::from_array(rho)};
}

double sup_gap(const GridFunctionPair& a, const GridFunctionPair& b)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < a.nodes(); ++j) {
        worst = std::max({worst, std::abs(a.bottom[j] - b.bottom[j]), std::abs(a.top[j] - b.top[j])});
    }
    return worst;
}

const SineSeries smooth_deviation{{0.8, -0.3, 0.15}, {-0.5, 0.4, 0.0, 0.1}};

} // namespace

TEST(CrankNicolson, ConstantStateIsFixed)
{
    const auto mp = make(0.5, 1.0, {2, 2, 2, 2});
    GridFunctionPair g{std::vector<double>(101, 2.0), std::vector<double>(101, 2.0), 0.0};
    const auto next = CrankNicolson(mp, 100, 1e-3).advance(g, 10);
    EXPECT_LE(sup_gap(g, next), 1e-13);
    EXPECT_NEAR(next.time, 1e-2, 1e-15);
}

TEST(CrankNicolson, StationaryProfileIsNearlyFixed)
{
    for (double eps : {0.0, 0.5, 1.0}) {
        const auto mp = make(eps, 1.0, {2, 6, 4, 2});
        const auto g = stationary_grid(mp, 400);
        EXPECT_LE(sup_gap(g, pde_step_cn(g, 1e-3, mp)), 1e-5) << eps;
    }
}

TEST(CrankNicolson, HomogeneousEnergyDecays)
{
    const auto mp = make(0.3, 1.0, {0, 0, 0, 0});
    const std::size_t m = 200;
    const double dt = 1e-3;
    auto g = pde_solve_bessel(smooth_deviation, 0.0, mp, m);
    const CrankNicolson cn(mp, m, dt);
    const double lowest = 4.0 * m * m * std::pow(std::sin(std::numbers::pi / (2.0 * m)), 2);
    const double z = 0.5 * dt * mp.epsilon * lowest;
    const double per_step = 2.0 * std::log((1 - z) / (1 + z));
    const double e0 = energy(g);
    double previous = e0;
    for (int n = 1; n <= 500; ++n) {
        g = cn.step(g);
        const double e = energy(g);
        ASSERT_LT(e, previous);
        ASSERT_LE(std::log(e), std::log(e0) + n * per_step + 1e-12);
        previous = e;
    }
}

TEST(CrankNicolson, SingleModeFollowsMatrixExponential)
{
    const auto mp = make(0.4, 1.5, {0, 0, 0, 0});
    const std::size_t m = 400;
    SineSeries one{{0.0, 1.0}, {0.0, -0.5}};
    const auto start = pde_solve_bessel(one, 0.0, mp, m);
    const auto end = CrankNicolson(mp, m, 1e-4).advance(start, 1000);
    const double lambda = 4.0 * m * m * std::pow(std::sin(2 * std::numbers::pi / (2.0 * m)), 2);
    const Mat2 flow = oracle::mode_flow(mp.epsilon, mp.upsilon, lambda, 0.1);
    const double x = 0.3;
    const std::size_t j = static_cast<std::size_t>(x * m);
    const double wave = std::sin(2 * std::numbers::pi * x);
    EXPECT_NEAR(end.bottom[j], (flow.a00 * 1.0 + flow.a01 * -0.5) * wave, 1e-7);
    EXPECT_NEAR(end.top[j], (flow.a10 * 1.0 + flow.a11 * -0.5) * wave, 1e-7);
}

TEST(PeriodicCrankNicolson, ConservesMassAndMatchesModeDecay)
{
    const std::size_t m = 64;
    const PeriodicCrankNicolson cn(0.5, 2.0, m, 1e-4);
    GridFunctionPair g;
    for (std::size_t j = 0; j < m; ++j) {
        const double x = static_cast<double>(j) / m;
        g.bottom.push_back(1.0 + 0.3 * std::cos(2 * std::numbers::pi * x));
        g.top.push_back(2.0);
    }
    const auto end = cn.advance(g, 500);
    double mass0 = 0.0, mass1 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        mass0 += g.bottom[j] + g.top[j];
        mass1 += end.bottom[j] + end.top[j];
    }
    EXPECT_NEAR(mass0, mass1, 1e-10);
    const double lambda = 4.0 * m * m * std::pow(std::sin(std::numbers::pi / m), 2);
    const Mat2 mode = oracle::mode_flow(0.5, 2.0, lambda, 0.05);
    const Mat2 mean = oracle::mode_flow(0.5, 2.0, 0.0, 0.05);
    const double mean0 = mean.a00 * 1.0 + mean.a01 * 2.0;
    EXPECT_NEAR(end.bottom[0], mean0 + mode.a00 * 0.3, 1e-6);
    EXPECT_NEAR(end.top[0], mean.a10 * 1.0 + mean.a11 * 2.0 + mode.a10 * 0.3, 1e-6);
}

TEST(Bessel, ZeroTimeReturnsInitialData)
{
    const auto mp = make(0.5, 1.0, {2, 6, 4, 2});
    const auto a = pde_solve_bessel(smooth_deviation, 0.0, mp, 50);
    const auto stat = stationary_grid(mp, 50);
    const double x = 0.3;
    const std::size_t j = 15;
    const double expect = stat.bottom[j] + 0.8 * std::sin(std::numbers::pi * x) - 0.3 * std::sin(2 * std::numbers::pi * x) +
                          0.15 * std::sin(3 * std::numbers::pi * x);
    EXPECT_NEAR(a.bottom[j], expect, 1e-14);
}

TEST(Bessel, StationaryDataStaysPut)
{
    const auto mp = make(0.5, 1.0, {2, 6, 4, 2});
    EXPECT_EQ(sup_gap(pde_solve_bessel({}, 0.7, mp, 40), stationary_grid(mp, 40)), 0.0);
}

TEST(Bessel, ModeAmplitudesMatchMatrixExponential)
{
    for (double eps : {0.0, 0.1, 0.5, 0.9, 1.0}) {
        const auto mp = make(eps, 1.3, {0, 0, 0, 0});
        for (int k : {1, 3}) {
            for (double t : {0.01, 0.1, 0.4}) {
                const auto got = evolve_mode(mp, k, {1.0, -0.7}, t);
                const Mat2 flow = oracle::mode_flow(eps, 1.3, std::pow(k * std::numbers::pi, 2), t);
                EXPECT_NEAR(got.bottom, flow.a00 - 0.7 * flow.a01, 1e-9) << eps << " " << k << " " << t;
                EXPECT_NEAR(got.top, flow.a10 - 0.7 * flow.a11, 1e-9) << eps << " " << k << " " << t;
            }
        }
    }
}

TEST(Bessel, AgreesWithCrankNicolsonOnCoarseGrid)
{
    const auto mp = make(0.5, 1.0, {2, 6, 4, 2});
    const std::size_t m = 200;
    const auto start = sample_initial(smooth_deviation, mp, m);
    const auto cn = CrankNicolson(mp, m, 1e-4).advance(start, 1000);
    EXPECT_LE(sup_gap(cn, pde_solve_bessel(smooth_deviation, 0.1, mp, m)), 1e-4);
}
