#pragma once

// Deterministic cross-oracle checks shared by the acceptance run and `swips verify`.

#include "block_tridiag.hpp"
#include "macro.hpp"
#include "pde.hpp"
#include "stationary.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace swips::oracle {

// Scaling and squaring with a truncated Taylor series.
inline Mat2 expm(const Mat2& m)
{
    const double norm = std::abs(m.a00) + std::abs(m.a01) + std::abs(m.a10) + std::abs(m.a11);
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.25) {
        scale *= 0.5;
        ++squarings;
    }
    const Mat2 a = scale * m;
    Mat2 term = Mat2::identity();
    Mat2 sum = Mat2::identity();
    for (int k = 1; k <= 24; ++k) {
        term = (1.0 / k) * (term * a);
        sum = sum + term;
    }
    for (int i = 0; i < squarings; ++i) {
        sum = sum * sum;
    }
    return sum;
}

// exp(t psi^{-1}(-lambda I + A)) psi^{-1} with psi = diag(1, eps).
inline Mat2 resolvent(double eps, double upsilon, double lambda, double t)
{
    const Mat2 gen{-lambda - upsilon, upsilon, upsilon / eps, (-lambda - upsilon) / eps};
    return expm(t * gen) * Mat2::diagonal(1.0, 1.0 / eps);
}

// exp(t(-lambda diag(1, eps) + A)) applied to a mode amplitude pair.
inline Mat2 mode_flow(double eps, double upsilon, double lambda, double t)
{
    const Mat2 gen{-lambda - upsilon, upsilon, upsilon, -eps * lambda - upsilon};
    return expm(t * gen);
}

} // namespace swips::oracle

namespace swips::checks {

struct CheckOutcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail << " [miss: " << what << "]";
        }
    }
};

inline std::string label(const char* head, double value, const char* tail)
{
    std::ostringstream s;
    s << head << value << tail;
    return s.str();
}

inline ModelParams micro(int sigma, int n, double eps, double gamma, std::array<double, 4> rho,
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

inline MacroParams macro(double eps, double ups, std::array<double, 4> rho)
{
    return {eps, ups, ReservoirDensities::from_array(rho)};
}

inline const std::array<double, 4> mixed_rho = {2, 6, 4, 1};
inline const std::vector<int> sizes = {2, 3, 5, 10, 50, 200};
inline const std::vector<double> gammas = {0.1, 1.0, 10.0};
inline const std::vector<double> epsilons = {0.0, 1e-3, 0.5, 1.0};

inline double table_gap(const AbsorptionTable& a, const AbsorptionTable& b)
{
    double worst = 0.0;
    for (std::size_t x = 0; x < a.bottom.size(); ++x) {
        for (int j = 0; j < 4; ++j) {
            worst = std::max({worst, std::abs(a.bottom[x][j] - b.bottom[x][j]), std::abs(a.top[x][j] - b.top[x][j])});
        }
    }
    return worst;
}

inline void check_absorption_equivalence(CheckOutcome& out)
{
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int n : sizes) {
        for (double g : gammas) {
            for (double e : epsilons) {
                const auto p = micro(0, n, e, g, mixed_rho);
                const auto closed = e == 0.0 ? absorption_closed_eps0(p) : absorption_closed(p);
                worst = std::max(worst, table_gap(closed, absorption_linear(p)));
            }
        }
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.detail << "max |closed - linear| = " << worst << ", " << seconds << " s";
    out.require(worst <= 1e-9, "difference <= 1e-9");
    out.require(seconds < 5.0, "runtime < 5 s");
}

inline void check_row_stochasticity(CheckOutcome& out)
{
    double worst_sum = 0.0, worst_excursion = 0.0;
    for (int n : sizes) {
        for (double g : gammas) {
            for (double e : epsilons) {
                const auto p = micro(0, n, e, g, mixed_rho);
                for (const auto& table : {absorption_linear(p), e == 0.0 ? absorption_closed_eps0(p) : absorption_closed(p)}) {
                    for (const auto* rows : {&table.bottom, &table.top}) {
                        for (const auto& r : *rows) {
                            worst_sum = std::max(worst_sum, std::abs(r[0] + r[1] + r[2] + r[3] - 1.0));
                        }
                    }
                }
                const auto prof = micro_profile(p);
                const auto [lo, hi] = std::minmax_element(mixed_rho.begin(), mixed_rho.end());
                for (const auto* theta : {&prof.theta0, &prof.theta1}) {
                    for (double v : *theta) {
                        worst_excursion = std::max({worst_excursion, *lo - v, v - *hi});
                    }
                }
            }
        }
    }
    out.detail << "max |row sum - 1| = " << worst_sum << ", max hull excursion = " << worst_excursion;
    out.require(worst_sum <= 1e-12, "row sums within 1e-12");
    out.require(worst_excursion <= 1e-12, "theta inside reservoir hull");
}

inline void check_inverse_reconstruction(CheckOutcome& out)
{
    double worst = 0.0;
    for (int n = 2; n <= 50; ++n) {
        for (double e : {0.01, 0.5, 1.0}) {
            for (double g : gammas) {
                const auto m = coefficient_matrix(n, e, g);
                const auto inv = c_vectors(micro(0, n, e, g, mixed_rho)).inverse();
                for (int i = 0; i < 4; ++i) {
                    for (int j = 0; j < 4; ++j) {
                        double s = 0.0;
                        for (int k = 0; k < 4; ++k) {
                            s += m[i][k] * inv[k][j];
                        }
                        worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
                    }
                }
            }
        }
    }
    auto big = micro(0, 1'000'000, 1e-3, 1.0, mixed_rho);
    big.upsilon = 1.0;
    const auto cv = c_vectors(big);
    bool finite = true;
    for (int x : {1, 2, 500'000, 999'999, 1'000'000}) {
        for (double v : cv.bottom_row(x)) {
            finite = finite && std::isfinite(v);
        }
        for (double v : cv.top_row(x)) {
            finite = finite && std::isfinite(v);
        }
    }
    out.detail << "max |M M^-1 - I| = " << worst << ", N = 1e6 rows finite = " << (finite ? "yes" : "no");
    out.require(worst <= 1e-8, "reconstruction within 1e-8");
    out.require(finite, "no overflow at N = 1e6");
}

inline void check_current_facts(CheckOutcome& out)
{
    double worst = 0.0;
    for (int n : sizes) {
        for (double g : gammas) {
            for (double e : epsilons) {
                const auto prof = micro_profile(micro(0, n, e, g, mixed_rho));
                for (std::size_t x = 0; x < prof.current0.size(); ++x) {
                    worst = std::max(worst, std::abs(prof.current0[x] + prof.current1[x] -
                                                     (prof.current0[0] + prof.current1[0])));
                }
            }
        }
    }
    const double sym = macro_current(macro(1.0, 1.0, {2, 4, 4, 2}), 0.5).total;
    const double slow = macro_current(macro(1e-3, 1.0, {2, 4, 4, 2}), 0.5).total;
    out.detail << "micro current spread = " << worst << ", J(eps=1) = " << sym << ", J(eps=1e-3) = " << slow;
    out.require(worst <= 1e-12, "x-independent micro current");
    out.require(std::abs(sym) <= 1e-14, "J = 0 at eps = 1");
    out.require(std::abs(slow + 1.998) <= 1e-12, "J = -1.998 at eps = 1e-3");
}

inline void check_uphill_transition(CheckOutcome& out)
{
    bool consistent = true;
    for (int i = 1; i <= 20; ++i) {
        const double e = 0.05 * i;
        const auto v = uphill(macro(e, 1.0, {2, 6, 4, 2}));
        const Verdict want = i < 10 ? Verdict::uphill : i == 10 ? Verdict::boundary : Verdict::downhill;
        consistent = consistent && v.verdict == want;
    }
    const auto v = uphill(macro(0.25, 1.0, {2, 6, 4, 2}));
    const bool quarter = v.verdict == Verdict::uphill;
    const bool three_quarter = uphill(macro(0.75, 1.0, {2, 6, 4, 2})).verdict == Verdict::downhill;
    out.detail << "eps* = " << (v.critical_epsilon ? *v.critical_epsilon : -1.0)
               << ", grid flips only at 0.5: " << (consistent ? "yes" : "no")
               << ", eps=0.25 " << to_string(v.verdict);
    out.require(v.critical_epsilon && *v.critical_epsilon == 0.5, "eps* = 1/2");
    out.require(consistent && quarter && three_quarter, "verdicts");
}

inline void check_boundary_width(CheckOutcome& out)
{
    for (double ups : {0.5, 1.0, 4.0}) {
        const auto layer = boundary_layer(macro(1e-6, ups, {4, 2, 3, 3}), 1.0);
        const double normalized = *layer.left_ratio * std::sqrt(ups);
        out.detail << "Upsilon " << ups << ": ratio " << *layer.left_ratio << " (x sqrt(Upsilon) = " << normalized
                   << "); ";
        out.require(normalized >= 0.9 && normalized <= 1.1, label("Upsilon ", ups, " within 10%"));
    }
}

inline double sup_gap(const GridFunctionPair& a, const GridFunctionPair& b)
{
    double worst = 0.0;
    for (std::size_t j = 0; j < a.nodes(); ++j) {
        worst = std::max({worst, std::abs(a.bottom[j] - b.bottom[j]), std::abs(a.top[j] - b.top[j])});
    }
    return worst;
}

inline double telegrapher_residual()
{
    const auto mp = macro(0.5, 1.0, {2, 6, 4, 2});
    const std::size_t m = 2000;
    const double dt = 1e-5;
    const SineSeries data{{0.6, -0.2}, {-0.4, 0.3}};
    const CrankNicolson cn(mp, m, dt);
    auto g = cn.advance(sample_initial(data, mp, m), 5000);
    // five snapshots spaced 10 steps apart around t = 0.05 + 2 tau
    const std::size_t gap = 10;
    const double tau = gap * dt;
    std::vector<std::vector<double>> total;
    for (int s = 0; s < 5; ++s) {
        std::vector<double> rho(m + 1);
        for (std::size_t j = 0; j <= m; ++j) {
            rho[j] = g.bottom[j] + g.top[j];
        }
        total.push_back(std::move(rho));
        if (s < 4) {
            g = cn.advance(g, gap);
        }
    }
    const std::size_t stride = 20;
    const double big_h = stride / static_cast<double>(m);
    auto at = [&](int s, std::ptrdiff_t j) { return total[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)]; };
    auto lap = [&](auto f, std::ptrdiff_t j) {
        const auto d = static_cast<std::ptrdiff_t>(stride);
        return (-f(j - 2 * d) + 16 * f(j - d) - 30 * f(j) + 16 * f(j + d) - f(j + 2 * d)) / (12 * big_h * big_h);
    };
    auto bilap = [&](auto f, std::ptrdiff_t j) {
        const auto d = static_cast<std::ptrdiff_t>(stride);
        return (-f(j - 3 * d) + 12 * f(j - 2 * d) - 39 * f(j - d) + 56 * f(j) - 39 * f(j + d) + 12 * f(j + 2 * d) -
                f(j + 3 * d)) /
               (6 * std::pow(big_h, 4));
    };
    auto dt1 = [&](std::ptrdiff_t j) {
        return (at(0, j) - 8 * at(1, j) + 8 * at(3, j) - at(4, j)) / (12 * tau);
    };
    auto dt2 = [&](std::ptrdiff_t j) {
        return (-at(0, j) + 16 * at(1, j) - 30 * at(2, j) + 16 * at(3, j) - at(4, j)) / (12 * tau * tau);
    };
    auto now = [&](std::ptrdiff_t j) { return at(2, j); };
    const double e = mp.epsilon, ups = mp.upsilon;
    double worst = 0.0;
    for (std::size_t j = m / 20; j <= m - m / 20; ++j) {
        const auto i = static_cast<std::ptrdiff_t>(j);
        const double r = dt2(i) + 2 * ups * dt1(i) + e * bilap(now, i) - (1 + e) * lap(dt1, i) -
                         (1 + e) * ups * lap(now, i);
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

inline void check_pde_oracles(CheckOutcome& out)
{
    const auto mp = macro(0.5, 1.0, {2, 6, 4, 2});
    const SineSeries data{{0.8, -0.3, 0.15}, {-0.5, 0.4, 0.0, 0.1}};
    const std::size_t m = 2000;
    const auto cn = CrankNicolson(mp, m, 1e-5).advance(sample_initial(data, mp, m), 10'000);
    const double bessel_gap = sup_gap(cn, pde_solve_bessel(data, 0.1, mp, m));

    double fixed_gap = 0.0;
    for (double e : {0.5, 1.0}) {
        const auto q = macro(e, 1.0, {2, 6, 4, 2});
        const auto g = stationary_grid(q, 1000);
        fixed_gap = std::max(fixed_gap, sup_gap(g, pde_step_cn(g, 1e-3, q)));
    }

    const auto zero = macro(0.5, 1.0, {0, 0, 0, 0});
    const std::size_t em = 1000;
    const double edt = 1e-4;
    const CrankNicolson decay(zero, em, edt);
    auto g = sample_initial(data, zero, em);
    const double lowest = 4.0 * em * em * std::pow(std::sin(std::numbers::pi / (2.0 * em)), 2);
    const double z = 0.5 * edt * zero.epsilon * lowest;
    const double per_step = 2.0 * std::log((1 - z) / (1 + z));
    const double e0 = energy(g);
    double previous = e0;
    bool monotone = true, under_line = true;
    for (int n = 1; n <= 2000; ++n) {
        g = decay.step(g);
        const double en = energy(g);
        monotone = monotone && en < previous;
        under_line = under_line && std::log(en) <= std::log(e0) + n * per_step + 1e-12;
        previous = en;
    }

    const double residual = telegrapher_residual();
    out.detail << "Bessel vs CN sup = " << bessel_gap << ", CN fixed-point change = " << fixed_gap
               << ", energy monotone = " << (monotone ? "yes" : "no") << ", under rate line = "
               << (under_line ? "yes" : "no") << ", E(0.2)/E(0) = " << previous / e0
               << ", telegrapher residual = " << residual;
    out.require(bessel_gap <= 1e-4, "Bessel vs CN <= 1e-4");
    out.require(fixed_gap <= 1e-6, "stationary CN fixed point <= 1e-6");
    out.require(monotone && under_line, "energy decay");
    out.require(residual <= 1e-3, "telegrapher residual <= 1e-3");
}

inline void check_resolvent(CheckOutcome& out)
{
    double worst = 0.0;
    for (double e : {1e-3, 0.01, 0.1, 0.5, 0.9, 1.0}) {
        for (double ups : {0.25, 1.0, 4.0}) {
            for (double lambda : {0.1, 1.0, std::numbers::pi * std::numbers::pi, 50.0}) {
                for (double t : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0}) {
                    const Mat2 k = resolvent_kernel(e, ups, lambda, t);
                    const Mat2 o = oracle::resolvent(e, ups, lambda, t);
                    worst = std::max({worst, std::abs(k.a00 - o.a00), std::abs(k.a01 - o.a01),
                                      std::abs(k.a10 - o.a10), std::abs(k.a11 - o.a11)});
                }
            }
        }
    }
    double continuity = 0.0;
    for (double ups : {0.5, 1.0, 2.0}) {
        for (double lambda : {0.5, 1.0, 5.0}) {
            for (double t : {0.1, 0.5, 1.0, 2.0}) {
                const Mat2 a = resolvent_kernel(1e-8, ups, lambda, t), b = resolvent_kernel(0.0, ups, lambda, t);
                continuity = std::max({continuity, std::abs(a.a00 - b.a00), std::abs(a.a01 - b.a01),
                                       std::abs(a.a10 - b.a10), std::abs(a.a11 - b.a11)});
            }
        }
    }
    out.detail << "max |closed - expm| = " << worst << ", eps=1e-8 vs eps=0 = " << continuity;
    out.require(worst <= 1e-10, "closed form vs oracle <= 1e-10");
    out.require(continuity <= 1e-4, "small-eps continuity <= 1e-4");
}

inline void check_micro_to_macro(CheckOutcome& out)
{
    const std::array<double, 4> rho = {2, 6, 4, 2};
    auto gap = [&](int n, double e) {
        auto p = micro(0, n, e, 1.0, rho);
        p.upsilon = 1.0;
        const auto prof = micro_profile(p);
        const auto mp = macro(e, 1.0, rho);
        double worst = 0.0;
        for (int x = 1; x <= n; ++x) {
            const auto r = macro_profile(mp, static_cast<double>(x) / (n + 1));
            worst = std::max({worst, std::abs(prof.theta0[static_cast<std::size_t>(x - 1)] - r.bottom),
                              std::abs(prof.theta1[static_cast<std::size_t>(x - 1)] - r.top)});
        }
        return worst;
    };
    for (double e : {0.1, 1.0}) {
        double previous = INFINITY;
        bool decreasing = true;
        for (int n : {250, 500, 1000, 2000}) {
            const double g = gap(n, e);
            decreasing = decreasing && g < previous;
            previous = g;
        }
        out.detail << "eps " << e << ": gap(N=2000) = " << previous << (decreasing ? " decreasing" : " not decreasing")
                   << "; ";
        out.require(previous <= 0.01 && decreasing, label("eps ", e, " uniform convergence"));
    }
    double smallest = INFINITY;
    for (int n : {100, 500, 2000, 10000}) {
        auto p = micro(0, n, 0.0, 1.0, rho);
        p.upsilon = 1.0;
        const auto prof = micro_profile(p);
        const auto r = macro_profile(macro(0.0, 1.0, rho), 1.0 / (n + 1));
        smallest = std::min(smallest, std::abs(prof.theta1[0] - r.top));
    }
    out.detail << "eps 0: min gap at x=1 over N = " << smallest;
    out.require(smallest >= 1.0, "eps 0 gap bounded away from 0");
}

inline void check_macro_invariants(CheckOutcome& out)
{
    const std::array<double, 4> rho = {2, 6, 4, 2};
    double residual = 0.0, split = 0.0, gradient = 0.0, fick_sym = 0.0, fick_half = 0.0;
    for (double e : {1e-3, 0.5, 1.0}) {
        const auto mp = macro(e, 1.0, rho);
        for (double y = 0.01; y < 0.995; y += 0.01) {
            const double h2 = 1e-4;
            const auto m = macro_profile(mp, y - h2), c = macro_profile(mp, y), p = macro_profile(mp, y + h2);
            residual = std::max({residual,
                                 std::abs((m.bottom - 2 * c.bottom + p.bottom) / (h2 * h2) + mp.upsilon * (c.top - c.bottom)),
                                 std::abs(e * (m.top - 2 * c.top + p.top) / (h2 * h2) + mp.upsilon * (c.bottom - c.top))});
            const double h1 = 1e-5;
            const auto l = macro_profile(mp, y - h1), r = macro_profile(mp, y + h1);
            const auto j = macro_current(mp, y);
            split = std::max(split, std::abs(j.bottom + j.top - j.total));
            gradient = std::max({gradient, std::abs(j.bottom + (r.bottom - l.bottom) / (2 * h1)),
                                 std::abs(j.top + e * (r.top - l.top) / (2 * h1))});
            const double fick = std::abs(j.total + (r.bottom + r.top - l.bottom - l.top) / (2 * h1));
            if (e == 1.0) {
                fick_sym = std::max(fick_sym, fick);
            } else if (e == 0.5) {
                fick_half = std::max(fick_half, fick);
            }
        }
    }
    out.detail << "stationary residual = " << residual << ", |J0+J1-J| = " << split
               << ", |J_i + flux gradient| = " << gradient << ", Fick gap eps=1: " << fick_sym
               << ", eps=0.5: " << fick_half;
    out.require(residual <= 1e-5, "stationary residual <= 1e-5");
    out.require(split <= 1e-12, "layer currents add up to J");
    out.require(gradient <= 1e-6, "layer currents are flux gradients");
    out.require(fick_sym <= 1e-6 && fick_half > 0.1, "Fick's law holds only at eps = 1");
}

struct NamedCheck {
    const char* name;
    void (*run)(CheckOutcome&);
};

// Invariant suite: every check here must hold. The boundary-layer width law is a limit
// statement and is reported separately.
inline std::vector<NamedCheck> invariant_suite()
{
    return {
        {"absorption closed forms vs linear solve", check_absorption_equivalence},
        {"row-stochasticity and maximum principle", check_row_stochasticity},
        {"inverse reconstruction and large-N stability", check_inverse_reconstruction},
        {"current constancy and macro totals", check_current_facts},
        {"macro profile and current identities", check_macro_invariants},
        {"uphill transition at critical epsilon", check_uphill_transition},
        {"PDE cross-oracles", check_pde_oracles},
        {"resolvent kernel vs matrix exponential", check_resolvent},
        {"micro to macro convergence", check_micro_to_macro},
    };
}

} // namespace swips::checks
