#include <swips/ctmc.hpp>
#include <swips/stationary.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace swips;

namespace {

ModelParams params(int sigma, int n, double eps, double gamma, std::array<double, 4> rho,
                   Mode mode = Mode::boundary_driven)
{
    ModelParams p;
    p.sigma = sigma;
    p.n_sites = n;
    p.epsilon = eps;
    p.gamma = gamma;
    p.reservoir = ReservoirDensities::from_array(rho);
    p.mode = mode;
    return p;
}

Configuration config(std::vector<std::array<std::int64_t, 2>> eta)
{
    Configuration c;
    c.eta = std::move(eta);
    return c;
}

double rate_of(const std::vector<Transition>& ts, EventKind kind, int site, int target, int layer)
{
    double r = 0.0;
    for (const auto& t : ts) {
        if (t.kind == kind && t.site == site && t.target == target && t.layer == layer) {
            r += t.rate;
        }
    }
    return r;
}

} // namespace

TEST(BuildEvents, ExclusionTorusBlockedHops)
{
    const auto p = params(-1, 2, 0.5, 0.7, {0, 0, 0, 0}, Mode::bulk_torus);
    const auto c = config({{1, 0}, {1, 0}});
    const auto table = build_events(c, p);
    const auto ts = table.transitions(c.eta);
    EXPECT_EQ(rate_of(ts, EventKind::hop0, 0, 1, 0), 0.0);
    EXPECT_EQ(rate_of(ts, EventKind::hop0, 1, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(rate_of(ts, EventKind::switch_layer, 0, 0, 0), 0.7);
    EXPECT_DOUBLE_EQ(rate_of(ts, EventKind::switch_layer, 1, 1, 0), 0.7);
    EXPECT_EQ(ts.size(), 2u);
    EXPECT_DOUBLE_EQ(table.total(), 1.4);
}

TEST(BuildEvents, EmptyOpenSystemOnlyInjects)
{
    const auto p = params(0, 5, 0.1, 1.0, {0.3, 0.4, 0.6, 0.8});
    const auto c = Configuration(5);
    const auto table = build_events(c, p);
    const auto ts = table.transitions(c.eta);
    ASSERT_EQ(ts.size(), 4u);
    for (const auto& t : ts) {
        EXPECT_EQ(t.kind, EventKind::inject);
    }
    EXPECT_DOUBLE_EQ(ts[0].rate, 0.3);
    EXPECT_DOUBLE_EQ(ts[1].rate, 0.4);  // layer-1 injection is not scaled by epsilon
    EXPECT_DOUBLE_EQ(ts[2].rate, 0.6);
    EXPECT_DOUBLE_EQ(ts[3].rate, 0.8);
    EXPECT_EQ(ts[0].site, 0);
    EXPECT_EQ(ts[2].site, 4);
    EXPECT_DOUBLE_EQ(table.total(), 2.1);
}

TEST(BuildEvents, InclusionRates)
{
    const auto p = params(1, 2, 0.5, 0.3, {0, 0, 0, 0});
    const auto c = config({{2, 0}, {0, 0}});
    const auto ts = build_events(c, p).transitions(c.eta);
    EXPECT_DOUBLE_EQ(rate_of(ts, EventKind::hop0, 0, 1, 0), 2.0);
    EXPECT_DOUBLE_EQ(rate_of(ts, EventKind::switch_layer, 0, 0, 0), 0.6);
    // removal into the empty left reservoir: 2 * (1 + sigma * 0)
    double absorb = 0.0;
    for (const auto& t : ts) {
        if (t.kind == EventKind::absorb) {
            absorb += t.rate;
        }
    }
    EXPECT_DOUBLE_EQ(absorb, 2.0);
}

TEST(BuildEvents, SlowLayerFrozenAtZeroEpsilon)
{
    const auto p = params(0, 3, 0.0, 1.0, {0, 0, 0, 0});
    const auto c = config({{0, 3}, {0, 2}, {0, 0}});
    const auto table = build_events(c, p);
    EXPECT_EQ(table.subtotal(EventKind::hop1), 0.0);
    for (const auto& t : table.transitions(c.eta)) {
        EXPECT_NE(t.kind, EventKind::hop1);
    }
}

TEST(Gillespie, HoldingTimeMean)
{
    const auto p = params(0, 4, 0.5, 1.0, {2.5, 0, 0, 0});
    Engine engine(p, Configuration(4).eta, BoundaryRule::reservoirs);
    RngStream rng(11, 0);
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        sum += engine.propose(rng).first;
    }
    const double r = 2.5;
    EXPECT_NEAR(sum / n, 1.0 / r, 4.0 / (r * std::sqrt(static_cast<double>(n))));
}

TEST(Gillespie, SelectionFrequencies)
{
    const auto p = params(0, 4, 0.5, 1.0, {1.0, 0, 3.0, 0});
    Engine engine(p, Configuration(4).eta, BoundaryRule::reservoirs);
    RngStream rng(12, 0);
    const int n = 100000;
    int right = 0;
    for (int i = 0; i < n; ++i) {
        right += engine.propose(rng).second.side == 1 ? 1 : 0;
    }
    EXPECT_NEAR(static_cast<double>(right) / n, 0.75, 4.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(Gillespie, TreeSelectionMatchesRates)
{
    // above the linear-scan limit so the Fenwick path is exercised
    const int n = 100;
    const auto p = params(0, n, 0.3, 0.2, {0, 0, 0, 0}, Mode::bulk_torus);
    Configuration c(n);
    for (int x = 0; x < n; ++x) {
        c.eta[static_cast<std::size_t>(x)] = {x % 7, (x * 3) % 5};
    }
    Engine engine(p, c.eta, BoundaryRule::none);
    const auto ts = engine.table().transitions(c.eta);
    std::map<std::tuple<int, int, int, int>, double> expected;
    double total = 0.0;
    for (const auto& t : ts) {
        expected[{static_cast<int>(t.kind), t.site, t.target, t.layer}] += t.rate;
        total += t.rate;
    }
    EXPECT_NEAR(engine.total_rate(), total, 1e-9 * total);
    RngStream rng(13, 0);
    const int draws = 400000;
    std::map<std::tuple<int, int, int, int>, int> seen;
    for (int i = 0; i < draws; ++i) {
        const auto t = engine.propose(rng).second;
        ++seen[{static_cast<int>(t.kind), t.site, t.target, t.layer}];
    }
    double chi2 = 0.0;
    for (const auto& [key, rate] : expected) {
        const double e = draws * rate / total;
        const double o = seen.count(key) ? seen[key] : 0;
        chi2 += (o - e) * (o - e) / e;
        seen.erase(key);
    }
    EXPECT_TRUE(seen.empty()) << "sampled a transition with zero rate";
    const double dof = static_cast<double>(expected.size() - 1);
    EXPECT_LT(chi2, dof + 5.0 * std::sqrt(2.0 * dof));
}

TEST(Gillespie, ExclusionNeverViolated)
{
    const auto p = params(-1, 6, 0.7, 1.3, {0.9, 0.2, 0.1, 0.8});
    Engine engine(p, Configuration(6).eta, BoundaryRule::reservoirs);
    RngStream rng(14, 0);
    for (int i = 0; i < 200000; ++i) {
        engine.step(rng);
        for (const auto& site : engine.occupation()) {
            ASSERT_LE(site[0], 1);
            ASSERT_LE(site[1], 1);
        }
    }
}

TEST(Gillespie, TorusConservesMass)
{
    for (int sigma = -1; sigma <= 1; ++sigma) {
        const int n = sigma == 1 ? 80 : 8;
        const auto p = params(sigma, n, 0.4, 0.9, {0, 0, 0, 0}, Mode::bulk_torus);
        Configuration c(n);
        for (int x = 0; x < n; x += 2) {
            c.eta[static_cast<std::size_t>(x)] = {1, x % 4 == 0 ? 1 : 0};
        }
        const auto mass = c.total();
        Engine engine(p, c.eta, BoundaryRule::none);
        RngStream rng(15, static_cast<std::uint64_t>(sigma + 1));
        for (int i = 0; i < 50000; ++i) {
            engine.step(rng);
            std::int64_t now = 0;
            for (const auto& site : engine.occupation()) {
                now += site[0] + site[1];
            }
            ASSERT_EQ(now, mass);
        }
    }
}

TEST(Gillespie, IncrementalTotalMatchesRecomputation)
{
    const int n = 120;
    const auto p = params(1, n, 0.6, 0.8, {1.0, 2.0, 0.5, 1.5});
    Engine engine(p, Configuration(n).eta, BoundaryRule::reservoirs);
    RngStream rng(16, 0);
    for (int i = 0; i < 2'100'000; ++i) {
        engine.step(rng);
    }
    EXPECT_GE(engine.max_drift(), 0.0);
    EXPECT_LE(engine.max_drift(), 1e-9);
    EXPECT_LE(engine.table().drift(engine.occupation()), 1e-9);
}

TEST(Gillespie, HaltsOnEmptyClosedSystem)
{
    const auto p = params(0, 3, 1.0, 1.0, {0, 0, 0, 0}, Mode::bulk_torus);
    Configuration c(3);
    auto table = build_events(c, p);
    RngStream rng(17, 0);
    try {
        gillespie_step(c, table, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::halted);
    }
}

TEST(Gillespie, OccupancyCapAborts)
{
    const auto p = params(1, 2, 1.0, 1.0, {50.0, 50.0, 50.0, 50.0});
    Engine engine(p, Configuration(2).eta, BoundaryRule::reservoirs, 20);
    RngStream rng(18, 0);
    EXPECT_THROW(
        {
            for (int i = 0; i < 1000000; ++i) {
                engine.step(rng);
            }
        },
        Error);
}

TEST(Simulate, EqualReservoirsGivePoissonMean)
{
    const auto p = params(0, 4, 0.5, 1.0, {1.5, 1.5, 1.5, 1.5});
    RngStream rng(19, 0);
    const auto stats = simulate(p, Configuration(4), 20000.0, 200.0, rng);
    for (int x = 0; x < 4; ++x) {
        for (int layer = 0; layer < 2; ++layer) {
            EXPECT_NEAR(stats.theta[x][layer], 1.5, 4.0 * stats.theta_se[x][layer]) << x << layer;
            EXPECT_GE(stats.theta[x][layer], static_cast<double>(stats.min_occupation[x][layer]));
            EXPECT_LE(stats.theta[x][layer], static_cast<double>(stats.max_occupation[x][layer]));
        }
    }
}

TEST(Simulate, MatchesMicroProfile)
{
    const auto p = params(0, 3, 0.5, 1.0, {2, 4, 4, 2});
    const auto exact = micro_profile(p);
    RngStream rng(20, 0);
    const auto stats = simulate(p, Configuration(3), 40000.0, default_burn_in(p), rng);
    for (int x = 0; x < 3; ++x) {
        EXPECT_NEAR(stats.theta[x][0], exact.theta0[x], 4.0 * stats.theta_se[x][0]);
        EXPECT_NEAR(stats.theta[x][1], exact.theta1[x], 4.0 * stats.theta_se[x][1]);
    }
    // edges 1..N-1 are bulk bonds; net crossing rate equals the layer current
    for (int e = 1; e < 3; ++e) {
        EXPECT_NEAR(stats.current[e][0], exact.current0[e - 1], 4.0 * stats.current_se[e][0]);
        EXPECT_NEAR(stats.current[e][1], exact.current1[e - 1], 4.0 * stats.current_se[e][1]);
    }
}

TEST(Simulate, ExclusionAveragesInUnitInterval)
{
    const auto p = params(-1, 5, 0.3, 0.5, {1.0, 0.0, 0.0, 1.0});
    RngStream rng(21, 0);
    const auto stats = simulate(p, Configuration(5), 5000.0, 100.0, rng);
    const auto exact = micro_profile(p);
    for (int x = 0; x < 5; ++x) {
        for (int layer = 0; layer < 2; ++layer) {
            EXPECT_GE(stats.theta[x][layer], 0.0);
            EXPECT_LE(stats.theta[x][layer], 1.0);
        }
        // profiles do not depend on sigma
        EXPECT_NEAR(stats.theta[x][0], exact.theta0[x], 4.0 * stats.theta_se[x][0] + 1e-3);
    }
}

TEST(Simulate, InclusionTruncatedCorrelationIsNonZero)
{
    const auto p = params(1, 2, 1.0, 1.0, {0.2, 0.2, 4.0, 4.0});
    const int replicas = 16;
    std::vector<double> truncated;
    for (int r = 0; r < replicas; ++r) {
        RngStream rng(22, static_cast<std::uint64_t>(r));
        SimulationOptions options;
        options.pairs = {{0, 0, 1, 0}};
        const auto s = simulate(p, Configuration(2), 4000.0, 100.0, rng, options);
        truncated.push_back(s.pair_mean[0] - s.theta[0][0] * s.theta[1][0]);
    }
    double mean = 0.0;
    for (double v : truncated) {
        mean += v;
    }
    mean /= replicas;
    double ss = 0.0;
    for (double v : truncated) {
        ss += (v - mean) * (v - mean);
    }
    const double se = std::sqrt(ss / (replicas - 1) / replicas);
    EXPECT_GT(std::abs(mean), 4.0 * se) << mean << " +- " << se;
}

TEST(Simulate, ReversibilitySmoke)
{
    // product measure with constant density and matching reservoirs is stationary
    const double theta = 0.8;
    const auto p = params(0, 5, 0.5, 1.0, {theta, theta, theta, theta});
    const int replicas = 20000;
    double s_t = 0.0, s2_t = 0.0, s_ts = 0.0, s2_ts = 0.0;
    for (int r = 0; r < replicas; ++r) {
        RngStream rng(23, static_cast<std::uint64_t>(r));
        const auto start = sample_product_configuration(0, 5, [&](int, int) { return theta; }, rng);
        const auto at_t = evolve(p, start, 0.5, rng);
        const auto at_ts = evolve(p, at_t, 1.5, rng);
        const auto a = static_cast<double>(at_t.eta[2][0]);
        const auto b = static_cast<double>(at_ts.eta[2][0]);
        s_t += a;
        s2_t += a * a;
        s_ts += b;
        s2_ts += b * b;
    }
    const double m_t = s_t / replicas, m_ts = s_ts / replicas;
    const double v = (s2_t / replicas - m_t * m_t + s2_ts / replicas - m_ts * m_ts) / replicas;
    EXPECT_NEAR(m_t, m_ts, 4.0 * std::sqrt(v));
    EXPECT_NEAR(m_t, theta, 4.0 * std::sqrt(theta / replicas));
}

TEST(Dual, SingleSiteAbsorptionSplit)
{
    const auto table = absorption_linear(1, 0.4, 1.0);
    ModelParams p = params(0, 1, 0.4, 1.0, {0, 0, 0, 0});
    std::array<int, 4> counts{};
    const int replicas = 100000;
    for (int r = 0; r < replicas; ++r) {
        RngStream rng(24, static_cast<std::uint64_t>(r));
        DualConfiguration xi(1);
        xi.bulk[0] = {1, 0};
        const auto out = simulate_dual(p, xi, rng);
        ASSERT_EQ(out.total(), 1);
        ASSERT_EQ(out.in_bulk(), 0);
        counts[0] += static_cast<int>(out.left[0]);
        counts[1] += static_cast<int>(out.left[1]);
        counts[2] += static_cast<int>(out.right[0]);
        counts[3] += static_cast<int>(out.right[1]);
    }
    for (int j = 0; j < 4; ++j) {
        const double prob = table.bottom[0][j];
        EXPECT_NEAR(counts[j] / static_cast<double>(replicas), prob,
                    4.0 * std::sqrt(prob * (1 - prob) / replicas));
    }
}

TEST(Dual, AbsorptionMatchesClosedFormsForAllSigma)
{
    struct Case {
        int n;
        double gamma, eps;
        int start_x, start_layer;
    };
    const Case cases[] = {{4, 1.0, 0.0, 2, 1}, {3, 0.5, 0.5, 1, 0}, {5, 2.0, 1.0, 1, 1}};
    for (const auto& c : cases) {
        const auto table = absorption_linear(c.n, c.eps, c.gamma);
        const auto& row = c.start_layer == 0 ? table.bottom[static_cast<std::size_t>(c.start_x - 1)]
                                             : table.top[static_cast<std::size_t>(c.start_x - 1)];
        for (int sigma = -1; sigma <= 1; ++sigma) {
            auto p = params(sigma, c.n, c.eps, c.gamma, {0.5, 0.5, 0.5, 0.5});
            std::array<int, 4> counts{};
            const int replicas = sigma == 0 ? 100000 : 20000;
            for (int r = 0; r < replicas; ++r) {
                RngStream rng(25, static_cast<std::uint64_t>(r * 3 + sigma + 1));
                DualConfiguration xi(c.n);
                xi.bulk[static_cast<std::size_t>(c.start_x - 1)][static_cast<std::size_t>(c.start_layer)] = 1;
                const auto out = simulate_dual(p, xi, rng);
                counts[0] += static_cast<int>(out.left[0]);
                counts[1] += static_cast<int>(out.left[1]);
                counts[2] += static_cast<int>(out.right[0]);
                counts[3] += static_cast<int>(out.right[1]);
            }
            for (int j = 0; j < 4; ++j) {
                EXPECT_NEAR(counts[j] / static_cast<double>(replicas), row[j],
                            4.0 * std::sqrt(row[j] * (1 - row[j]) / replicas) + 1e-12)
                    << "n=" << c.n << " sigma=" << sigma << " j=" << j;
            }
        }
    }
}

TEST(Dual, ConservesParticles)
{
    const auto p = params(1, 4, 0.3, 0.8, {0, 0, 0, 0});
    DualConfiguration xi(4);
    xi.bulk[1] = {2, 1};
    xi.bulk[3] = {0, 2};
    RngStream rng(26, 0);
    for (double horizon : {0.0, 0.1, 1.0, 5.0}) {
        const auto out = evolve_dual(p, xi, horizon, rng);
        EXPECT_EQ(out.total(), xi.total());
    }
    const auto done = simulate_dual(p, xi, rng);
    EXPECT_EQ(done.in_bulk(), 0);
    EXPECT_EQ(done.total(), 5);
}

TEST(Dual, EventGuard)
{
    const auto p = params(0, 50, 1.0, 1.0, {0, 0, 0, 0});
    DualConfiguration xi(50);
    xi.bulk[25] = {1, 0};
    RngStream rng(27, 0);
    try {
        simulate_dual(p, xi, rng, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::nontermination);
    }
}
