#include <swips/model.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace swips;

TEST(Philox, KnownAnswerVectors)
{
    auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(zero[0], 0x6627e8d5u);
    EXPECT_EQ(zero[1], 0xe169c58du);
    EXPECT_EQ(zero[2], 0xbc57ac4cu);
    EXPECT_EQ(zero[3], 0x9b00dbd8u);

    auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(ones[0], 0x408f276du);
    EXPECT_EQ(ones[1], 0x41c83b0eu);
    EXPECT_EQ(ones[2], 0xa20bc7c6u);
    EXPECT_EQ(ones[3], 0x6d5451fdu);

    auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(pi[0], 0xd16cfe09u);
    EXPECT_EQ(pi[1], 0x94fdccebu);
    EXPECT_EQ(pi[2], 0x5001e420u);
    EXPECT_EQ(pi[3], 0x24126ea1u);
}

TEST(RngStream, ReproducibleAndDistinct)
{
    RngStream a(42, 7), b(42, 7), c(42, 8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a();
        EXPECT_EQ(va, b());
        differs = differs || (va != c());
    }
    EXPECT_TRUE(differs);
    auto child1 = a.split(1);
    auto child1b = b.split(1);
    auto child2 = a.split(2);
    EXPECT_EQ(child1(), child1b());
    EXPECT_NE(child1.stream(), child2.stream());
}

TEST(RngStream, UniformRange)
{
    RngStream rng(1, 0);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Validate, Examples)
{
    ModelParams p;
    p.sigma = -1;
    p.reservoir = {1.2, 0.5, 0.5, 0.5};
    try {
        validate(p);
        FAIL() << "expected validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::validation);
        EXPECT_NE(std::string(e.what()).find("exclusion"), std::string::npos);
    }

    ModelParams ok;
    ok.sigma = 0;
    ok.epsilon = 0.0;
    ok.gamma = 1.0;
    ok.n_sites = 10;
    ok.reservoir = {0.5, 0.5, 0.5, 0.5};
    EXPECT_NO_THROW(validate(ok));

    ModelParams zero_gamma = ok;
    zero_gamma.gamma = 0.0;
    EXPECT_THROW(validate(zero_gamma), Error);

    ModelParams bad_eps = ok;
    bad_eps.epsilon = 1.5;
    EXPECT_THROW(validate(bad_eps), Error);

    ModelParams small = ok;
    small.n_sites = 1;
    EXPECT_THROW(validate(small), Error);
}

TEST(Validate, UpsilonDerivesGamma)
{
    ModelParams p;
    p.n_sites = 10;
    p.upsilon = 2.0;
    p.gamma = -1.0;  // ignored when upsilon is authoritative
    EXPECT_NO_THROW(validate(p));
    EXPECT_DOUBLE_EQ(p.switch_rate(), 0.02);
}

TEST(SingleSiteDual, Examples)
{
    for (int sigma = -1; sigma <= 1; ++sigma) {
        for (int n = 0; n < 30; ++n) {
            EXPECT_EQ(single_site_dual(0, n, sigma), 1.0);
        }
    }
    EXPECT_EQ(single_site_dual(2, 5, 0), 20.0);
    EXPECT_EQ(single_site_dual(2, 5, -1), 20.0);
    EXPECT_EQ(single_site_dual(2, 5, 1), 10.0);
    EXPECT_EQ(single_site_dual(1, 1, -1), 1.0);
    EXPECT_EQ(single_site_dual(1, 0, -1), 0.0);
}

TEST(SingleSiteDual, WeightIdentityAndSupport)
{
    for (int n = 0; n <= 40; ++n) {
        for (int k = 0; k <= 42; ++k) {
            for (int sigma = -1; sigma <= 1; ++sigma) {
                const double d = single_site_dual(k, n, sigma);
                if (k > n) {
                    EXPECT_EQ(d, 0.0);
                    continue;
                }
                EXPECT_GT(d, 0.0);
                const double weight = sigma == 1 ? std::tgamma(k + 1.0) : 1.0;
                const double falling = std::exp(std::lgamma(n + 1.0) - std::lgamma(n - k + 1.0));
                EXPECT_NEAR(d * weight / falling, 1.0, 1e-12) << k << ' ' << n << ' ' << sigma;
            }
        }
    }
}

namespace {

void check_moments(int sigma, double theta, double mean, double variance)
{
    RngStream rng(2024, static_cast<std::uint64_t>(sigma + 5));
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto v = static_cast<double>(sample_equilibrium_marginal(sigma, theta, rng));
        s1 += v;
        s2 += v * v;
    }
    const double m = s1 / n;
    const double var = s2 / n - m * m;
    EXPECT_NEAR(m, mean, 4.0 * std::sqrt(variance / n)) << "sigma=" << sigma;
    // variance of the sample variance is (mu4 - var^2)/n; a loose 10% band is enough here
    EXPECT_NEAR(var, variance, 0.1 * variance + 1e-12) << "sigma=" << sigma;
}

} // namespace

TEST(Marginals, Moments)
{
    check_moments(-1, 0.3, 0.3, 0.3 * 0.7);
    check_moments(0, 2.0, 2.0, 2.0);
    check_moments(1, 1.0, 1.0, 2.0);
    check_moments(1, 2.5, 2.5, 2.5 * 3.5);
}

TEST(Marginals, DegenerateAndDomain)
{
    RngStream rng(3, 3);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(sample_equilibrium_marginal(-1, 0.0, rng), 0);
        EXPECT_EQ(sample_equilibrium_marginal(-1, 1.0, rng), 1);
    }
    EXPECT_THROW(sample_equilibrium_marginal(-1, 1.5, rng), Error);
    EXPECT_THROW(sample_equilibrium_marginal(0, -0.1, rng), Error);
    EXPECT_NO_THROW(sample_equilibrium_marginal(1, 50.0, rng));
}

TEST(Config, RoundTrip)
{
    RunConfig run;
    run.params.sigma = 1;
    run.params.epsilon = 0.25;
    run.params.upsilon = 3.0;
    run.params.n_sites = 17;
    run.params.reservoir = {2.0, 6.0, 4.0, 2.0};
    run.params.mode = Mode::bulk_torus;
    run.seed = 99;
    const auto back = parse_config(to_config_text(run));
    EXPECT_EQ(back.params.sigma, 1);
    EXPECT_EQ(back.params.epsilon, 0.25);
    ASSERT_TRUE(back.params.upsilon.has_value());
    EXPECT_EQ(*back.params.upsilon, 3.0);
    EXPECT_EQ(back.params.n_sites, 17);
    EXPECT_EQ(back.params.reservoir.rho_L1, 6.0);
    EXPECT_EQ(back.params.mode, Mode::bulk_torus);
    EXPECT_EQ(back.seed, 99u);
}

TEST(Config, Rejections)
{
    EXPECT_THROW(parse_config("gamma=1\nupsilon=1\n"), Error);
    EXPECT_THROW(parse_config("sigma\n"), Error);
    EXPECT_THROW(parse_config("colour=red\n"), Error);
    EXPECT_THROW(parse_config("epsilon=abc\n"), Error);
    EXPECT_NO_THROW(parse_config("# comment only\n\nsigma = -1  # trailing\n"));
}
