#include <swips/stationary.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace swips;

namespace {

ModelParams make_params(int n, double eps, double gamma, std::array<double, 4> rho = {2, 4, 4, 2})
{
    ModelParams p;
    p.sigma = 0;
    p.n_sites = n;
    p.epsilon = eps;
    p.gamma = gamma;
    p.reservoir = ReservoirDensities::from_array(rho);
    return p;
}

double max_diff(const AbsorptionTable& a, const AbsorptionTable& b)
{
    double worst = 0.0;
    for (std::size_t x = 0; x < a.bottom.size(); ++x) {
        for (int j = 0; j < 4; ++j) {
            worst = std::max(worst, std::abs(a.bottom[x][j] - b.bottom[x][j]));
            worst = std::max(worst, std::abs(a.top[x][j] - b.top[x][j]));
        }
    }
    return worst;
}

} // namespace

TEST(AbsorptionLinear, ThreeSitesZeroEpsilon)
{
    const auto table = absorption_linear(make_params(3, 0.0, 1.0));
    const AbsorptionRow expected = {8.0 / 15, 4.0 / 15, 2.0 / 15, 1.0 / 15};
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(table.bottom[0][j], expected[j], 1e-14);
    }
}

TEST(AbsorptionClosedEps0, ThreeSites)
{
    const auto table = absorption_closed_eps0(make_params(3, 0.0, 1.0));
    const AbsorptionRow expected = {8.0 / 15, 4.0 / 15, 2.0 / 15, 1.0 / 15};
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(table.bottom[0][j], expected[j], 1e-15);
    }
}

TEST(AbsorptionClosedEps0, InteriorAndMirrorIdentities)
{
    const auto p = make_params(7, 0.0, 0.4);
    const auto table = absorption_closed_eps0(p);
    for (int x = 1; x < 6; ++x) {
        for (int j = 0; j < 4; ++j) {
            EXPECT_EQ(table.top[x][j], table.bottom[x][j]);
        }
    }
    EXPECT_DOUBLE_EQ(table.top[6][0], table.top[0][2]);
    EXPECT_THROW(absorption_closed_eps0(make_params(7, 0.5, 0.4)), Error);
}

TEST(AbsorptionLinear, SingleSite)
{
    const auto table = absorption_linear(1, 0.3, 1.0);
    const AbsorptionRow bottom = {3.0 / 8, 1.0 / 8, 3.0 / 8, 1.0 / 8};
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(table.bottom[0][j], bottom[j], 1e-15);
        EXPECT_NEAR(table.top[0][j], bottom[j ^ 1], 1e-15);
    }
}

TEST(AbsorptionLinear, RelabelingSymmetry)
{
    const auto p = make_params(9, 0.37, 2.5);
    const auto table = absorption_linear(p);
    const int n = p.n_sites;
    for (int x = 0; x < n; ++x) {
        for (int j = 0; j < 4; ++j) {
            const int swapped = (j + 2) % 4;
            EXPECT_NEAR(table.bottom[x][j], table.bottom[n - 1 - x][swapped], 1e-14);
            EXPECT_NEAR(table.top[x][j], table.top[n - 1 - x][swapped], 1e-14);
        }
    }
}

TEST(Roots, Examples)
{
    const auto r = roots(1.0, 2.0);
    EXPECT_NEAR(r.small, 3.0 - 2.0 * std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(r.large, 3.0 + 2.0 * std::sqrt(2.0), 1e-14);
    const auto tiny = roots(0.5, 1e-14);
    EXPECT_NEAR(tiny.small, 1.0, 1e-6);
    EXPECT_NEAR(tiny.large, 1.0, 1e-6);
    EXPECT_THROW(roots(0.0, 1.0), Error);
}

TEST(Roots, ProductAndResidual)
{
    for (double eps : {1e-8, 1e-3, 0.1, 0.5, 1.0}) {
        for (double gamma : {1e-12, 1e-6, 0.1, 1.0, 10.0, 1e3}) {
            const auto r = roots(eps, gamma);
            EXPECT_GT(r.small, 0.0);
            EXPECT_LT(r.small, 1.0);
            EXPECT_GT(r.large, 1.0);
            EXPECT_NEAR(r.small * r.large, 1.0, 1e-13);
            const double linear = gamma * (1.0 + eps) + 2.0 * eps;
            for (double a : {r.small, r.large}) {
                const double residual = eps * a * a - linear * a + eps;
                const double scale = eps * a * a + linear * a + eps;
                EXPECT_LE(std::abs(residual) / scale, 1e-13) << eps << ' ' << gamma;
            }
            EXPECT_NEAR(r.gap, 1.0 - r.small, 1e-15);
        }
    }
}

TEST(CVectors, ReconstructsIdentity)
{
    for (int n : {2, 3, 5, 10, 20, 50}) {
        for (double eps : {0.01, 0.5, 1.0}) {
            for (double gamma : {0.1, 1.0, 10.0}) {
                const auto p = make_params(n, eps, gamma);
                const auto m = coefficient_matrix(n, eps, gamma);
                const auto inv = c_vectors(p).inverse();
                for (int i = 0; i < 4; ++i) {
                    double row_scale = 0.0;
                    for (int k = 0; k < 4; ++k) {
                        row_scale = std::max(row_scale, std::abs(m[i][k]));
                    }
                    for (int j = 0; j < 4; ++j) {
                        double s = 0.0, mag = 0.0;
                        for (int k = 0; k < 4; ++k) {
                            s += m[i][k] * inv[k][j];
                            mag += std::abs(m[i][k] * inv[k][j]);
                        }
                        EXPECT_NEAR(s, i == j ? 1.0 : 0.0, 1e-8 * std::max(1.0, mag))
                            << n << ' ' << eps << ' ' << gamma << ' ' << i << j;
                    }
                }
            }
        }
    }
}

TEST(CVectors, MacroscopicSlopeLimit)
{
    const double upsilon = 1.0;
    for (double eps : {0.1, 0.5, 1.0}) {
        const int n = 20000;
        auto p = make_params(n, eps, 1.0);
        p.upsilon = upsilon;
        const auto c = c_vectors(p);
        const std::array<double, 4> limit = {-1.0, -eps, 1.0, eps};
        for (int j = 0; j < 4; ++j) {
            EXPECT_NEAR(n * c.slope[j], limit[j] / (1.0 + eps), 2e-3) << eps << ' ' << j;
        }
    }
}

TEST(CVectors, HugeSystemStaysFinite)
{
    for (double eps : {1e-3, 0.5, 1.0}) {
        for (bool diffusive : {false, true}) {
            auto p = make_params(1000000, eps, 1.0);
            if (diffusive) {
                p.upsilon = 1.0;
            }
            const auto c = c_vectors(p);
            for (int j = 0; j < 4; ++j) {
                EXPECT_TRUE(std::isfinite(c.slope[j]));
                EXPECT_TRUE(std::isfinite(c.offset[j]));
                EXPECT_TRUE(std::isfinite(c.decaying[j]));
                EXPECT_TRUE(std::isfinite(c.growing_scaled[j]));
            }
            for (int x : {1, 2, 500000, 999999, 1000000}) {
                const auto row = c.bottom_row(x);
                double sum = 0.0;
                for (double v : row) {
                    EXPECT_TRUE(std::isfinite(v));
                    sum += v;
                }
                EXPECT_NEAR(sum, 1.0, 1e-10);
            }
        }
    }
}

TEST(Oracle, ClosedFormsMatchLinearSolve)
{
    for (int n : {2, 3, 5, 10, 50, 200}) {
        for (double gamma : {0.1, 1.0, 10.0}) {
            for (double eps : {0.0, 1e-3, 0.5, 1.0}) {
                const auto p = make_params(n, eps, gamma);
                const auto linear = absorption_linear(p);
                const auto closed = eps == 0.0 ? absorption_closed_eps0(p) : absorption_closed(p);
                EXPECT_LE(max_diff(linear, closed), 1e-9) << n << ' ' << gamma << ' ' << eps;
                for (const auto* rows : {&closed.bottom, &closed.top}) {
                    for (const auto& row : *rows) {
                        double sum = 0.0;
                        for (double v : row) {
                            EXPECT_GE(v, -1e-15);
                            sum += v;
                        }
                        EXPECT_NEAR(sum, 1.0, 1e-12);
                    }
                }
            }
        }
    }
}

TEST(MicroProfile, ZeroEpsilonCurrent)
{
    const auto profile = micro_profile(make_params(3, 0.0, 1.0));
    EXPECT_NEAR(profile.current_total, -0.2, 1e-15);
    for (std::size_t e = 0; e < profile.current0.size(); ++e) {
        EXPECT_NEAR(profile.current0[e] + profile.current1[e], -0.2, 1e-14);
    }
}

TEST(MicroProfile, Equilibrium)
{
    for (double eps : {0.0, 0.3, 1.0}) {
        const auto profile = micro_profile(make_params(12, eps, 0.7, {1.5, 1.5, 1.5, 1.5}));
        for (int x = 0; x < 12; ++x) {
            EXPECT_NEAR(profile.theta0[x], 1.5, 1e-13);
            EXPECT_NEAR(profile.theta1[x], 1.5, 1e-13);
        }
        EXPECT_NEAR(profile.current_total, 0.0, 1e-13);
    }
}

TEST(MicroProfile, CurrentConstancyAndMaximumPrinciple)
{
    for (double eps : {0.0, 1e-3, 0.2, 1.0}) {
        for (int n : {2, 7, 60}) {
            const std::array<double, 4> rho = {0.3, 5.0, 2.2, 0.9};
            const auto profile = micro_profile(make_params(n, eps, 0.8, rho));
            for (std::size_t e = 0; e < profile.current0.size(); ++e) {
                EXPECT_NEAR(profile.current0[e] + profile.current1[e], profile.current_total, 1e-12);
            }
            for (int x = 0; x < n; ++x) {
                for (double v : {profile.theta0[x], profile.theta1[x]}) {
                    EXPECT_GE(v, 0.3 - 1e-12);
                    EXPECT_LE(v, 5.0 + 1e-12);
                }
            }
        }
    }
}

TEST(MicroProfile, LayerSwapAtUnitEpsilon)
{
    const auto a = micro_profile(make_params(11, 1.0, 0.6, {1.0, 3.0, 2.0, 0.5}));
    const auto b = micro_profile(make_params(11, 1.0, 0.6, {3.0, 1.0, 0.5, 2.0}));
    for (int x = 0; x < 11; ++x) {
        EXPECT_NEAR(a.theta0[x], b.theta1[x], 1e-14);
        EXPECT_NEAR(a.theta1[x], b.theta0[x], 1e-14);
    }
}

TEST(MicroProfile, IndependentOfSigma)
{
    auto p = make_params(6, 0.4, 1.3, {0.2, 0.9, 0.5, 0.1});
    p.sigma = -1;
    const auto a = micro_profile(p);
    p.sigma = 1;
    const auto b = micro_profile(p);
    EXPECT_EQ(a.theta0, b.theta0);
    EXPECT_EQ(a.theta1, b.theta1);
}
