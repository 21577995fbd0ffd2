#pragma once

#include "bessel.hpp"
#include "block_tridiag.hpp"
#include "error.hpp"
#include "macro.hpp"
#include "quadrature.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace swips {

// Nodal values of both layers on a uniform grid. Dirichlet grids hold M+1 nodes
// including both endpoints; periodic grids hold M nodes at x = j/M.
struct GridFunctionPair {
    std::vector<double> bottom;
    std::vector<double> top;
    double time = 0.0;

    std::size_t nodes() const { return bottom.size(); }
};

inline GridFunctionPair stationary_grid(const MacroParams& mp, std::size_t intervals)
{
    GridFunctionPair g;
    g.bottom.resize(intervals + 1);
    g.top.resize(intervals + 1);
    for (std::size_t j = 0; j <= intervals; ++j) {
        const auto p = macro_profile(mp, static_cast<double>(j) / static_cast<double>(intervals));
        g.bottom[j] = p.bottom;
        g.top[j] = p.top;
    }
    return g;
}

// h * sum over interior nodes of (u0^2 + u1^2).
inline double energy(const GridFunctionPair& g, bool periodic = false)
{
    const std::size_t n = g.nodes();
    const std::size_t lo = periodic ? 0 : 1;
    const std::size_t hi = periodic ? n : n - 1;
    const double h = 1.0 / static_cast<double>(periodic ? n : n - 1);
    double sum = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
        sum += g.bottom[j] * g.bottom[j] + g.top[j] * g.top[j];
    }
    return h * sum;
}

namespace detail {

struct CnCoefficients {
    Mat2 lhs_diag, lhs_off, rhs_diag, rhs_off;
};

inline CnCoefficients cn_coefficients(double eps, double upsilon, double h, double dt)
{
    const double mesh = dt / (h * h);
    const double react = 0.5 * dt * upsilon;
    CnCoefficients c;
    c.lhs_diag = {1.0 + mesh + react, -react, -react, 1.0 + eps * mesh + react};
    c.lhs_off = Mat2::diagonal(-0.5 * mesh, -0.5 * eps * mesh);
    c.rhs_diag = {1.0 - mesh - react, react, react, 1.0 - eps * mesh - react};
    c.rhs_off = Mat2::diagonal(0.5 * mesh, 0.5 * eps * mesh);
    return c;
}

inline Block<1> column(double b, double t) { return {{{b}, {t}}}; }

inline Block<1> times(const Mat2& m, double b, double t) { return mul_block(m, column(b, t)); }

} // namespace detail

// Crank-Nicolson for the coupled reaction-diffusion system with constant Dirichlet data;
// the reaction block is implicit together with the diffusion. Factorized once per (M, dt).
class CrankNicolson {
public:
    CrankNicolson(const MacroParams& mp, std::size_t intervals, double dt)
        : params_(validate(mp)), intervals_(intervals), dt_(dt),
          coeff_(detail::cn_coefficients(mp.epsilon, mp.upsilon, 1.0 / static_cast<double>(intervals), dt)),
          solver_(make_solver(intervals, coeff_))
    {
        if (!(dt > 0.0)) {
            throw Error(ErrorKind::validation, "dt must be > 0");
        }
    }

    double dt() const { return dt_; }
    std::size_t intervals() const { return intervals_; }

    GridFunctionPair step(const GridFunctionPair& state) const
    {
        const auto& bc = params_.reservoir;
        if (state.nodes() != intervals_ + 1) {
            throw Error(ErrorKind::validation, "grid size does not match the solver");
        }
        const std::size_t n = intervals_ - 1;
        // boundary nodes are pinned to the reservoir values at both time levels
        auto bottom_at = [&](std::size_t j) {
            return j == 0 ? bc.rho_L0 : j == intervals_ ? bc.rho_R0 : state.bottom[j];
        };
        auto top_at = [&](std::size_t j) { return j == 0 ? bc.rho_L1 : j == intervals_ ? bc.rho_R1 : state.top[j]; };
        std::vector<Block<1>> rhs(n);
        for (std::size_t j = 1; j <= n; ++j) {
            auto r = detail::times(coeff_.rhs_diag, state.bottom[j], state.top[j]);
            const auto nb = detail::times(coeff_.rhs_off, bottom_at(j - 1) + bottom_at(j + 1), top_at(j - 1) + top_at(j + 1));
            r[0][0] += nb[0][0];
            r[1][0] += nb[1][0];
            rhs[j - 1] = r;
        }
        const auto left = detail::times(coeff_.rhs_off, bc.rho_L0, bc.rho_L1);
        const auto right = detail::times(coeff_.rhs_off, bc.rho_R0, bc.rho_R1);
        for (std::size_t r = 0; r < 2; ++r) {
            rhs.front()[r][0] += left[r][0];
            rhs.back()[r][0] += right[r][0];
        }
        const auto sol = solver_.solve(std::move(rhs));
        GridFunctionPair out;
        out.bottom.resize(intervals_ + 1);
        out.top.resize(intervals_ + 1);
        out.bottom.front() = bc.rho_L0;
        out.top.front() = bc.rho_L1;
        out.bottom.back() = bc.rho_R0;
        out.top.back() = bc.rho_R1;
        for (std::size_t j = 1; j <= n; ++j) {
            out.bottom[j] = sol[j - 1][0][0];
            out.top[j] = sol[j - 1][1][0];
        }
        out.time = state.time + dt_;
        return out;
    }

    GridFunctionPair advance(GridFunctionPair state, std::size_t steps) const
    {
        for (std::size_t s = 0; s < steps; ++s) {
            state = step(state);
        }
        return state;
    }

private:
    static BlockTridiagonal make_solver(std::size_t intervals, const detail::CnCoefficients& c)
    {
        if (intervals < 2) {
            throw Error(ErrorKind::validation, "need at least two grid intervals");
        }
        const std::size_t n = intervals - 1;
        return BlockTridiagonal(std::vector<Mat2>(n, c.lhs_off), std::vector<Mat2>(n, c.lhs_diag),
                                std::vector<Mat2>(n, c.lhs_off));
    }

    MacroParams params_;
    std::size_t intervals_;
    double dt_;
    detail::CnCoefficients coeff_;
    BlockTridiagonal solver_;
};

// Boundary values of the returned grid come from mp.reservoir; those of state are ignored.
inline GridFunctionPair pde_step_cn(const GridFunctionPair& state, double dt, const MacroParams& mp)
{
    return CrankNicolson(mp, state.nodes() - 1, dt).step(state);
}

// Crank-Nicolson on the unit torus. The wrap-around couplings are handled with a rank-4
// Woodbury correction of the open block-tridiagonal system.
class PeriodicCrankNicolson {
public:
    PeriodicCrankNicolson(double eps, double upsilon, std::size_t nodes, double dt)
        : nodes_(nodes), dt_(dt), coeff_(detail::cn_coefficients(eps, upsilon, 1.0 / static_cast<double>(nodes), dt)),
          solver_(std::vector<Mat2>(nodes, coeff_.lhs_off), std::vector<Mat2>(nodes, coeff_.lhs_diag),
                  std::vector<Mat2>(nodes, coeff_.lhs_off))
    {
        if (nodes < 3 || !(dt > 0.0)) {
            throw Error(ErrorKind::validation, "periodic grid needs >= 3 nodes and dt > 0");
        }
        std::vector<Block<4>> unit(nodes_);
        for (auto& b : unit) {
            b = Block<4>{};
        }
        unit.front()[0][0] = 1.0;
        unit.front()[1][1] = 1.0;
        unit.back()[0][2] = 1.0;
        unit.back()[1][3] = 1.0;
        correction_ = solver_.solve(std::move(unit));
        std::array<std::array<double, 4>, 4> cap{};
        for (std::size_t k = 0; k < 4; ++k) {
            const auto v = coupled(correction_.front(), correction_.back(), k);
            for (std::size_t r = 0; r < 4; ++r) {
                cap[r][k] = v[r] + (r == k ? 1.0 : 0.0);
            }
        }
        capacitance_inv_ = invert4(cap);
    }

    GridFunctionPair step(const GridFunctionPair& state) const
    {
        if (state.nodes() != nodes_) {
            throw Error(ErrorKind::validation, "grid size does not match the solver");
        }
        const std::size_t n = nodes_;
        std::vector<Block<1>> rhs(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t prev = (j + n - 1) % n, next = (j + 1) % n;
            auto r = detail::times(coeff_.rhs_diag, state.bottom[j], state.top[j]);
            const auto nb = detail::times(coeff_.rhs_off, state.bottom[prev] + state.bottom[next],
                                          state.top[prev] + state.top[next]);
            r[0][0] += nb[0][0];
            r[1][0] += nb[1][0];
            rhs[j] = r;
        }
        auto y = solver_.solve(std::move(rhs));
        std::array<double, 4> vy{};
        {
            const auto& o = coeff_.lhs_off;
            vy = {o.a00 * y.back()[0][0], o.a11 * y.back()[1][0], o.a00 * y.front()[0][0], o.a11 * y.front()[1][0]};
        }
        std::array<double, 4> w{};
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t k = 0; k < 4; ++k) {
                w[r] += capacitance_inv_[r][k] * vy[k];
            }
        }
        GridFunctionPair out;
        out.bottom.resize(n);
        out.top.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            double b = y[j][0][0], t = y[j][1][0];
            for (std::size_t k = 0; k < 4; ++k) {
                b -= correction_[j][0][k] * w[k];
                t -= correction_[j][1][k] * w[k];
            }
            out.bottom[j] = b;
            out.top[j] = t;
        }
        out.time = state.time + dt_;
        return out;
    }

    GridFunctionPair advance(GridFunctionPair state, std::size_t steps) const
    {
        for (std::size_t s = 0; s < steps; ++s) {
            state = step(state);
        }
        return state;
    }

private:
    // V^T applied to column k of Z: the wrap blocks couple node 0 to node n-1 and back.
    std::array<double, 4> coupled(const Block<4>& first, const Block<4>& last, std::size_t k) const
    {
        const auto& o = coeff_.lhs_off;
        return {o.a00 * last[0][k], o.a11 * last[1][k], o.a00 * first[0][k], o.a11 * first[1][k]};
    }

    static std::array<std::array<double, 4>, 4> invert4(std::array<std::array<double, 4>, 4> a)
    {
        std::array<std::array<double, 4>, 4> inv{};
        for (std::size_t i = 0; i < 4; ++i) {
            inv[i][i] = 1.0;
        }
        for (std::size_t c = 0; c < 4; ++c) {
            std::size_t pivot = c;
            for (std::size_t r = c + 1; r < 4; ++r) {
                if (std::abs(a[r][c]) > std::abs(a[pivot][c])) {
                    pivot = r;
                }
            }
            if (a[pivot][c] == 0.0) {
                throw Error(ErrorKind::singular, "singular periodic capacitance matrix");
            }
            std::swap(a[c], a[pivot]);
            std::swap(inv[c], inv[pivot]);
            const double d = a[c][c];
            for (std::size_t k = 0; k < 4; ++k) {
                a[c][k] /= d;
                inv[c][k] /= d;
            }
            for (std::size_t r = 0; r < 4; ++r) {
                if (r != c && a[r][c] != 0.0) {
                    const double f = a[r][c];
                    for (std::size_t k = 0; k < 4; ++k) {
                        a[r][k] -= f * a[c][k];
                        inv[r][k] -= f * inv[c][k];
                    }
                }
            }
        }
        return inv;
    }

    std::size_t nodes_;
    double dt_;
    detail::CnCoefficients coeff_;
    BlockTridiagonal solver_;
    std::vector<Block<4>> correction_;
    std::array<std::array<double, 4>, 4> capacitance_inv_{};
};

// Deviation from the stationary profile as a sine series: sum_k coeff[k-1] sin(k pi x).
struct SineSeries {
    std::vector<double> bottom;
    std::vector<double> top;
};

struct ModeAmplitude {
    double bottom = 0.0;
    double top = 0.0;
};

// Amplitudes after time t of one sine mode with wavenumber k pi, via the switching-time
// Bessel kernels (0 <= eps < 1) or the explicit heat flow (eps = 1).
inline ModeAmplitude evolve_mode(const MacroParams& mp, int k, ModeAmplitude start, double t,
                                 double tolerance = 1e-10)
{
    const double lambda = std::numbers::pi * std::numbers::pi * k * k;
    const double eps = mp.epsilon, ups = mp.upsilon;
    if (t == 0.0) {
        return start;
    }
    if (eps == 1.0) {
        const double heat = std::exp(-lambda * t);
        const double mean = 0.5 * (start.bottom + start.top);
        const double half_gap = 0.5 * (start.bottom - start.top) * std::exp(-2.0 * ups * t);
        return {heat * (mean + half_gap), heat * (mean - half_gap)};
    }
    ModeAmplitude out;
    out.bottom = std::exp(-(ups + lambda) * t) * start.bottom;
    out.top = std::exp(-(ups + eps * lambda) * t) * start.top;
    // u parametrizes the bottom-layer occupation time t u^2 (s = eps t + (1-eps) t u^2)
    auto kernel = [&](double u, bool bottom_end) {
        const double occupied0 = t * u * u, occupied1 = t * (1.0 - u * u);
        const double arg = 2.0 * ups * std::sqrt(occupied0 * occupied1);
        const double s = eps * t + (1.0 - eps) * occupied0;
        const double weight = std::exp(arg - ups * t - lambda * s) * 2.0 * t * u * ups;
        const double same = 2.0 * ups * (bottom_end ? occupied0 : occupied1) * bessel_i1_over_x_scaled(arg);
        const double cross = bessel_i0_scaled(arg);
        return bottom_end ? weight * (same * start.bottom + cross * start.top)
                          : weight * (same * start.top + cross * start.bottom);
    };
    out.bottom += integrate([&](double u) { return kernel(u, true); }, 0.0, 1.0, tolerance).value;
    out.top += integrate([&](double u) { return kernel(u, false); }, 0.0, 1.0, tolerance).value;
    return out;
}

// rho_i(t) = rho_i^stat + homogeneous evolution of the sine-series deviation, sampled on M+1 nodes.
inline GridFunctionPair pde_solve_bessel(const SineSeries& deviation, double t, const MacroParams& mp,
                                         std::size_t intervals)
{
    validate(mp);
    if (!(t >= 0.0) || intervals < 1) {
        throw Error(ErrorKind::validation, "need t >= 0 and at least one interval");
    }
    GridFunctionPair g = stationary_grid(mp, intervals);
    g.time = t;
    const std::size_t modes = std::max(deviation.bottom.size(), deviation.top.size());
    for (std::size_t m = 0; m < modes; ++m) {
        const ModeAmplitude start{m < deviation.bottom.size() ? deviation.bottom[m] : 0.0,
                                  m < deviation.top.size() ? deviation.top[m] : 0.0};
        if (start.bottom == 0.0 && start.top == 0.0) {
            continue;
        }
        const int k = static_cast<int>(m) + 1;
        const auto a = evolve_mode(mp, k, start, t);
        for (std::size_t j = 1; j < intervals; ++j) {
            const double wave = std::sin(k * std::numbers::pi * static_cast<double>(j) / static_cast<double>(intervals));
            g.bottom[j] += a.bottom * wave;
            g.top[j] += a.top * wave;
        }
    }
    return g;
}

// Sample a sine series (plus the stationary profile) onto M+1 nodes.
inline GridFunctionPair sample_initial(const SineSeries& deviation, const MacroParams& mp, std::size_t intervals)
{
    return pde_solve_bessel(deviation, 0.0, mp, intervals);
}

} // namespace swips
