#pragma once

#include "block_tridiag.hpp"
#include "error.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace swips {

struct MacroParams {
    double epsilon = 1.0;
    double upsilon = 1.0;
    ReservoirDensities reservoir;

    // Inverse boundary-layer length sqrt(Upsilon (1 + 1/eps)); eps > 0 only.
    double layer_rate() const { return std::sqrt(upsilon * (1.0 + 1.0 / epsilon)); }
};

inline MacroParams validate(const MacroParams& mp)
{
    if (!(mp.epsilon >= 0.0 && mp.epsilon <= 1.0)) {
        throw Error(ErrorKind::validation, "epsilon must lie in [0,1]");
    }
    if (!(mp.upsilon > 0.0 && std::isfinite(mp.upsilon))) {
        throw Error(ErrorKind::validation, "upsilon must be > 0");
    }
    for (double rho : mp.reservoir.as_array()) {
        if (!(rho >= 0.0 && std::isfinite(rho))) {
            throw Error(ErrorKind::validation, "reservoir densities must be >= 0");
        }
    }
    return mp;
}

namespace detail {

// sinh(B u) / sinh(B) for u in [0,1], overflow-free.
inline double sinh_ratio(double rate, double u)
{
    if (u <= 0.0) {
        return 0.0;
    }
    return std::exp(-rate * (1.0 - u)) * std::expm1(-2.0 * rate * u) / std::expm1(-2.0 * rate);
}

// cosh(B u) / sinh(B) for u in [0,1].
inline double cosh_ratio(double rate, double u)
{
    return std::exp(-rate * (1.0 - u)) * (1.0 + std::exp(-2.0 * rate * u)) / -std::expm1(-2.0 * rate);
}

} // namespace detail

struct LayerPair {
    double bottom = 0.0;  // layer 0
    double top = 0.0;     // layer 1
};

inline LayerPair macro_profile(const MacroParams& mp, double y)
{
    const auto& r = mp.reservoir;
    const double e = mp.epsilon;
    if (e == 0.0) {
        const double linear = r.rho_L0 + (r.rho_R0 - r.rho_L0) * y;
        if (y <= 0.0) {
            return {r.rho_L0, r.rho_L1};
        }
        if (y >= 1.0) {
            return {r.rho_R0, r.rho_R1};
        }
        return {linear, linear};
    }
    const double rate = mp.layer_rate();
    const double from_left = detail::sinh_ratio(rate, 1.0 - y);
    const double from_right = detail::sinh_ratio(rate, y);
    const double jump_left = r.rho_L0 - r.rho_L1;
    const double jump_right = r.rho_R0 - r.rho_R1;
    const double linear =
        ((r.rho_R0 * y + r.rho_L0 * (1.0 - y)) + e * (r.rho_R1 * y + r.rho_L1 * (1.0 - y))) / (1.0 + e);
    const double bend = from_left * jump_left + from_right * jump_right;
    return {linear + e / (1.0 + e) * bend, linear - bend / (1.0 + e)};
}

struct MacroCurrent {
    double bottom = 0.0;
    double top = 0.0;
    double total = 0.0;
};

inline MacroCurrent macro_current(const MacroParams& mp, double y)
{
    const auto& r = mp.reservoir;
    const double e = mp.epsilon;
    const double a0 = r.rho_R0 - r.rho_L0;
    const double a1 = r.rho_R1 - r.rho_L1;
    if (e == 0.0) {
        return {-a0, 0.0, -a0};
    }
    const double rate = mp.layer_rate();
    const double jump_left = r.rho_L0 - r.rho_L1;
    const double jump_right = r.rho_R0 - r.rho_R1;
    // derivative of the exponential part of the bottom profile, up to the factor e/(1+e)
    const double bend_slope =
        rate * (-detail::cosh_ratio(rate, 1.0 - y) * jump_left + detail::cosh_ratio(rate, y) * jump_right);
    const double mean_slope = (a0 + e * a1) / (1.0 + e);
    MacroCurrent j;
    j.bottom = -(mean_slope + e / (1.0 + e) * bend_slope);
    j.top = -e * (mean_slope - bend_slope / (1.0 + e));
    j.total = -(a0 + e * a1);
    return j;
}

enum class Verdict { downhill, uphill, boundary };

inline const char* to_string(Verdict v)
{
    switch (v) {
    case Verdict::downhill: return "downhill";
    case Verdict::uphill: return "uphill";
    case Verdict::boundary: return "boundary";
    }
    return "?";
}

struct UphillVerdict {
    double bottom_gap = 0.0;  // rho_R0 - rho_L0
    double top_gap = 0.0;     // rho_R1 - rho_L1
    double current = 0.0;
    double density_gap = 0.0;
    Verdict verdict = Verdict::boundary;
    std::optional<double> critical_epsilon;
};

inline UphillVerdict uphill(const MacroParams& mp)
{
    UphillVerdict v;
    v.bottom_gap = mp.reservoir.rho_R0 - mp.reservoir.rho_L0;
    v.top_gap = mp.reservoir.rho_R1 - mp.reservoir.rho_L1;
    v.current = -(v.bottom_gap + mp.epsilon * v.top_gap);
    v.density_gap = v.bottom_gap + v.top_gap;
    const double criterion = v.density_gap * (v.bottom_gap + mp.epsilon * v.top_gap);
    v.verdict = criterion < 0.0 ? Verdict::uphill : criterion > 0.0 ? Verdict::downhill : Verdict::boundary;
    if (v.bottom_gap * v.top_gap < 0.0) {
        v.critical_epsilon = -v.bottom_gap / v.top_gap;
    }
    return v;
}

struct BoundaryLayer {
    std::optional<double> left_width;   // R_L
    std::optional<double> left_ratio;   // R_L / (sqrt(eps) log(1/eps))
    std::optional<double> right_width;  // 1 - R_R
    std::optional<double> right_ratio;
};

namespace detail {

// Width of the region near one end where the slow-layer correction exceeds c*eps/Upsilon.
inline double layer_width(double eps, double upsilon, double jump, double c)
{
    const double rate = std::sqrt(upsilon * (1.0 + 1.0 / eps));
    const double log_sinh = rate + std::log1p(-std::exp(-2.0 * rate)) - std::log(2.0);
    const double log_z = std::log(c * eps / (upsilon * jump)) + log_sinh;
    const double asinh_z = log_z > 30.0 ? log_z + std::log1p(std::sqrt(1.0 + std::exp(-2.0 * log_z)))
                                        : std::asinh(std::exp(log_z));
    return std::clamp(1.0 - asinh_z / rate, 0.0, 0.5);
}

} // namespace detail

inline BoundaryLayer boundary_layer(const MacroParams& mp, double c)
{
    if (!(mp.epsilon > 0.0)) {
        throw Error(ErrorKind::domain, "boundary layer needs epsilon > 0");
    }
    if (!(c > 0.0)) {
        throw Error(ErrorKind::domain, "threshold constant must be > 0");
    }
    const double jump_left = std::abs(mp.reservoir.rho_L0 - mp.reservoir.rho_L1);
    const double jump_right = std::abs(mp.reservoir.rho_R0 - mp.reservoir.rho_R1);
    if (jump_left == 0.0 && jump_right == 0.0) {
        throw Error(ErrorKind::domain, "no boundary discontinuity, no layer");
    }
    const double scale = std::sqrt(mp.epsilon) * std::log(1.0 / mp.epsilon);
    BoundaryLayer out;
    if (jump_left > 0.0) {
        out.left_width = detail::layer_width(mp.epsilon, mp.upsilon, jump_left, c);
        out.left_ratio = *out.left_width / scale;
    }
    if (jump_right > 0.0) {
        out.right_width = detail::layer_width(mp.epsilon, mp.upsilon, jump_right, c);
        out.right_ratio = *out.right_width / scale;
    }
    return out;
}

// exp(t psi^{-1}(-lambda I + A)) psi^{-1}, psi = diag(1, eps), A = Upsilon [[-1,1],[1,-1]].
inline Mat2 resolvent_kernel(double eps, double upsilon, double lambda, double t)
{
    if (!(lambda > 0.0)) {
        throw Error(ErrorKind::domain, "lambda must be > 0");
    }
    if (eps == 0.0) {
        const double r = upsilon / (upsilon + lambda);
        const double decay = std::exp(-lambda * (2.0 * upsilon + lambda) / (upsilon + lambda) * t);
        return {decay, decay * r, decay * r, decay * r * r};
    }
    const double ell = 0.5 * (upsilon + lambda);
    const double skew = (1.0 - eps) * ell / eps;
    const double freq = std::sqrt(skew * skew + upsilon * upsilon / eps);
    const double damping = (1.0 + eps) * ell / eps;
    const double slow = std::exp(-lambda * (2.0 * upsilon + lambda) / (eps * (freq + damping)) * t);
    const double fast = std::exp(-(freq + damping) * t);
    const double plus = 1.0 + skew / freq;
    const double minus = upsilon * upsilon / (eps * freq * (freq + skew));  // 1 - skew/freq
    const double off = upsilon / (eps * freq) * 0.5 * slow * -std::expm1(-2.0 * freq * t);
    return {0.5 * (slow * plus + fast * minus), off, off, 0.5 * (slow * minus + fast * plus) / eps};
}

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

// Stationary profile as the expected boundary payoff of the switching diffusion
// dX = sqrt(2 D_i) dW (D_0 = 1, D_1 = eps), layer flips at rate Upsilon, stopped on leaving (0,1).
inline Estimate feynman_kac_stationary(const MacroParams& mp, double y, int layer, std::size_t replicas, double dt,
                                       RngStream& rng)
{
    validate(mp);
    if (replicas < 1000 || !(dt > 0.0 && dt <= 1e-4) || layer < 0 || layer > 1 || !(y >= 0.0 && y <= 1.0)) {
        throw Error(ErrorKind::validation, "bad Feynman-Kac arguments");
    }
    const std::array<double, 2> step_sd = {std::sqrt(2.0 * dt), std::sqrt(2.0 * mp.epsilon * dt)};
    std::vector<double> payoff(replicas);
    const RngStream root = rng.split(0x4b);
    parallel_for(replicas, [&](std::size_t r) {
        RngStream stream = root.split(r);
        boost::random::normal_distribution<double> normal;
        double x = y;
        int i = layer;
        double until_switch = stream.exponential(mp.upsilon);
        while (x > 0.0 && x < 1.0) {
            x += step_sd[static_cast<std::size_t>(i)] * normal(stream);
            until_switch -= dt;
            if (until_switch <= 0.0) {
                i = 1 - i;
                until_switch += stream.exponential(mp.upsilon);
            }
        }
        payoff[r] = mp.reservoir.at(x <= 0.0 ? 0 : 1, i);
    });
    double sum = 0.0;
    for (double v : payoff) {
        sum += v;
    }
    Estimate e;
    e.mean = sum / static_cast<double>(replicas);
    double ss = 0.0;
    for (double v : payoff) {
        ss += (v - e.mean) * (v - e.mean);
    }
    e.se = std::sqrt(ss / static_cast<double>(replicas - 1) / static_cast<double>(replicas));
    return e;
}

} // namespace swips
