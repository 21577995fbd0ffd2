#pragma once

#include "block_tridiag.hpp"
#include "error.hpp"
#include "model.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace swips {

// Absorption probabilities into the reservoirs (L0, L1, R0, R1).
using AbsorptionRow = std::array<double, 4>;

// Rows indexed by site x-1; bottom = walker started on layer 0, top = on layer 1.
struct AbsorptionTable {
    std::vector<AbsorptionRow> bottom;
    std::vector<AbsorptionRow> top;
};

// Absorption of a single dual walker; valid for any N >= 1 and eps in [0,1].
inline AbsorptionTable absorption_linear(int n_sites, double epsilon, double gamma)
{
    if (!(gamma > 0.0)) {
        throw Error(ErrorKind::singular, "switching rate must be positive");
    }
    const auto n = static_cast<std::size_t>(n_sites);
    const Mat2 neighbour = Mat2::diagonal(-1.0, -epsilon);
    std::vector<Mat2> lower(n, neighbour), upper(n, neighbour), diag(n);
    std::vector<Block<4>> rhs(n, Block<4>{});
    for (std::size_t x = 0; x < n; ++x) {
        double top_exit = 2.0 * epsilon;
        if (x == 0) {
            top_exit += 1.0 - epsilon;
            rhs[x][0][0] += 1.0;
            rhs[x][1][1] += 1.0;
        }
        if (x + 1 == n) {
            top_exit += 1.0 - epsilon;
            rhs[x][0][2] += 1.0;
            rhs[x][1][3] += 1.0;
        }
        diag[x] = {2.0 + gamma, -gamma, -gamma, top_exit + gamma};
    }
    const BlockTridiagonal system(std::move(lower), diag, std::move(upper));
    auto solution = system.solve(rhs);
    // Refinement with the residual formed in extended precision from the exact coefficients;
    // rounding 2 eps + gamma to double otherwise breaks the zero row sums of the generator.
    const long double eps_l = epsilon, gamma_l = gamma;
    std::vector<Block<4>> residual(n);
    for (std::size_t x = 0; x < n; ++x) {
        long double top_exit = 2 * eps_l;
        if (x == 0) {
            top_exit += 1 - eps_l;
        }
        if (x + 1 == n) {
            top_exit += 1 - eps_l;
        }
        for (std::size_t k = 0; k < 4; ++k) {
            const long double u0 = solution[x][0][k], u1 = solution[x][1][k];
            long double r0 = rhs[x][0][k] - ((2 + gamma_l) * u0 - gamma_l * u1);
            long double r1 = rhs[x][1][k] - (-gamma_l * u0 + (top_exit + gamma_l) * u1);
            for (std::size_t y : {x - 1, x + 1}) {
                if (y < n) {
                    r0 += solution[y][0][k];
                    r1 += eps_l * solution[y][1][k];
                }
            }
            residual[x][0][k] = static_cast<double>(r0);
            residual[x][1][k] = static_cast<double>(r1);
        }
    }
    const auto correction = system.solve(std::move(residual));
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t k = 0; k < 4; ++k) {
                solution[x][r][k] += correction[x][r][k];
            }
        }
    }
    AbsorptionTable table;
    table.bottom.resize(n);
    table.top.resize(n);
    for (std::size_t x = 0; x < n; ++x) {
        table.bottom[x] = solution[x][0];
        table.top[x] = solution[x][1];
    }
    return table;
}

inline AbsorptionTable absorption_linear(const ModelParams& params)
{
    const auto p = validate(params);
    return absorption_linear(p.n_sites, p.epsilon, p.switch_rate());
}

inline AbsorptionTable absorption_closed_eps0(const ModelParams& params)
{
    const auto p = validate(params);
    if (p.epsilon != 0.0) {
        throw Error(ErrorKind::domain, "closed form requires epsilon = 0");
    }
    const double g = p.switch_rate();
    const double n = p.n_sites;
    const double denom = 1.0 + n + 2.0 * n * g;
    const double fast = (1.0 + g) / (1.0 + 2.0 * g);
    const double slow = g / (1.0 + 2.0 * g);

    AbsorptionTable table;
    table.bottom.resize(static_cast<std::size_t>(p.n_sites));
    table.top.resize(static_cast<std::size_t>(p.n_sites));
    for (int x = 1; x <= p.n_sites; ++x) {
        const double to_left = (1.0 + n + (1.0 + 2.0 * n) * g - (1.0 + 2.0 * g) * x) / denom;
        const double to_right = (-g + (1.0 + 2.0 * g) * x) / denom;
        const AbsorptionRow row = {fast * to_left, slow * to_left, fast * to_right, slow * to_right};
        table.bottom[static_cast<std::size_t>(x - 1)] = row;
        table.top[static_cast<std::size_t>(x - 1)] = row;
    }
    const double edge_denom = (1.0 + 2.0 * g) * denom;
    const AbsorptionRow near = {g * (n - g + 2.0 * n * g) / edge_denom,
                                (1.0 + n + (1.0 + 3.0 * n) * g - (1.0 - 2.0 * n) * g * g) / edge_denom,
                                g * (1.0 + g) / edge_denom, g * g / edge_denom};
    table.top.front() = near;
    table.top.back() = {near[2], near[3], near[0], near[1]};
    return table;
}

struct RootPair {
    double small = 0.0;  // in (0,1)
    double large = 0.0;  // 1/small
    double gap = 0.0;    // 1 - small, computed without cancellation
    double log_small = 0.0;
};

inline RootPair roots(double epsilon, double gamma)
{
    if (!(epsilon > 0.0)) {
        throw Error(ErrorKind::domain, "roots require epsilon > 0");
    }
    if (!(gamma > 0.0)) {
        throw Error(ErrorKind::domain, "roots require gamma > 0");
    }
    const double half = 0.5 * gamma * (1.0 + 1.0 / epsilon);
    const double root = std::sqrt(half * half + 2.0 * half);
    RootPair r;
    r.large = 1.0 + half + root;
    r.small = 1.0 / r.large;
    r.gap = 2.0 * half / (root + half);
    r.log_small = r.gap < 0.5 ? std::log1p(-r.gap) : std::log(r.small);
    return r;
}

using Matrix4 = std::array<std::array<double, 4>, 4>;

// Boundary-condition matrix whose inverse rows are the profile coefficients.
// Uses the large root directly; meant for moderate N.
inline Matrix4 coefficient_matrix(int n_sites, double epsilon, double gamma)
{
    const auto r = roots(epsilon, gamma);
    const double n = n_sites;
    const double e = epsilon;
    const double a = r.small, b = r.large;
    return {{{0.0, 1.0, e, e},
             {1.0 - e, 1.0, (e - 1.0) * a - e, (e - 1.0) * b - e},
             {n + 1.0, 1.0, e * std::pow(a, n + 1.0), e * std::pow(b, n + 1.0)},
             {n + e, 1.0, -std::pow(a, n) * (e * a + 1.0 - e), -std::pow(b, n) * (e * b + 1.0 - e)}}};
}

// Profile coefficients: a walker started at (x, layer 0) is absorbed with probabilities
// slope*x + offset + eps*(decaying*a^x + growing_scaled*a^(N+1-x)), a = small root.
// The layer-1 row replaces eps by -1 in front of the exponential part.
struct CVectors {
    AbsorptionRow slope{};
    AbsorptionRow offset{};
    AbsorptionRow decaying{};
    AbsorptionRow growing_scaled{};
    RootPair root;
    int n_sites = 0;
    double epsilon = 0.0;

    double power(double k) const { return std::exp(k * root.log_small); }

    AbsorptionRow row(int x, double exp_weight) const
    {
        const double near = power(x);
        const double far = power(n_sites + 1 - x);
        AbsorptionRow out{};
        for (std::size_t j = 0; j < 4; ++j) {
            out[j] = slope[j] * x + offset[j] + exp_weight * (decaying[j] * near + growing_scaled[j] * far);
        }
        return out;
    }

    AbsorptionRow bottom_row(int x) const { return row(x, epsilon); }
    AbsorptionRow top_row(int x) const { return row(x, -1.0); }

    // Unscaled inverse of coefficient_matrix (underflows harmlessly for large N).
    Matrix4 inverse() const
    {
        Matrix4 out{};
        const double scale = power(n_sites + 1);
        for (std::size_t j = 0; j < 4; ++j) {
            out[0][j] = slope[j];
            out[1][j] = offset[j];
            out[2][j] = decaying[j];
            out[3][j] = growing_scaled[j] * scale;
        }
        return out;
    }
};

// All large-root powers are folded into small-root powers so nothing overflows.
inline CVectors c_vectors(int n_sites, double epsilon, double gamma)
{
    if (!(epsilon > 0.0)) {
        throw Error(ErrorKind::domain, "c-vectors require epsilon > 0");
    }
    CVectors c;
    c.root = roots(epsilon, gamma);
    c.n_sites = n_sites;
    c.epsilon = epsilon;
    const double n = n_sites;
    const double e = epsilon;
    const double f = 1.0 - epsilon;
    const double log_a = c.root.log_small;
    auto pw = [&](double k) { return std::exp(k * log_a); };
    auto one_minus = [&](double k) { return -std::expm1(k * log_a); };
    const double a = c.root.small;

    const double p_sum = f * (a + pw(n)) + 2.0 * e * (1.0 + pw(n + 1));
    const double q_sum = (1.0 + n) * f * (a - pw(n)) + 2.0 * e * (n + e) * one_minus(n + 1);
    const double r_sum = f * (a - pw(n)) + e * one_minus(n + 1);
    const double denom = p_sum * q_sum;

    c.slope = {-r_sum / q_sum, -e * one_minus(n + 1) / q_sum, r_sum / q_sum, e * one_minus(n + 1) / q_sum};

    // (b^k - a^k) a^(N+1) with b = 1/a
    auto spread = [&](double k) { return pw(n + 1 - k) * one_minus(2 * k); };
    c.offset = {((1 + n) * f * f * spread(n - 1) - e * f * f * spread(1) + e * e * (1 + 2 * n + e) * spread(n + 1) +
                 e * f * (2 + 3 * n + e) * spread(n)) /
                    denom,
                e * (f * (1 + n) * spread(n) + e * (1 + 2 * n + e) * spread(n + 1)) / denom,
                e * f * ((n + e) * spread(1) - f * spread(n) - e * spread(n + 1)) / denom,
                -e * f * ((1 + n) * spread(1) + e * spread(n + 1)) / denom};

    const double an = pw(n), an1 = pw(n + 1);
    const double tail = e * (1 - 2 * n - 3 * e);
    c.decaying = {(-f * f * an - e * f * an1 + f * (n + e) * a - tail) / denom,
                  (-f * (1 + n) * a - e * f * an1 - e * (1 + 2 * n + e)) / denom,
                  (f * f * a + e * f - f * (n + e) * an + tail * an1) / denom,
                  ((1 + n) * f * an + e * f + e * (1 + 2 * n + e) * an1) / denom};
    c.growing_scaled = {-(-f * f * a - e * f + f * (n + e) * an - tail * an1) / denom,
                        -(-f * (1 + n) * an - e * f - e * (1 + 2 * n + e) * an1) / denom,
                        -(f * f * an + e * f * an1 - f * (n + e) * a + tail) / denom,
                        -((1 + n) * f * a + e * f * an1 + e * (1 + 2 * n + e)) / denom};
    return c;
}

inline CVectors c_vectors(const ModelParams& params)
{
    const auto p = validate(params);
    return c_vectors(p.n_sites, p.epsilon, p.switch_rate());
}

inline AbsorptionTable absorption_closed(const ModelParams& params)
{
    const auto c = c_vectors(params);
    AbsorptionTable table;
    for (int x = 1; x <= c.n_sites; ++x) {
        table.bottom.push_back(c.bottom_row(x));
        table.top.push_back(c.top_row(x));
    }
    return table;
}

struct MicroProfile {
    std::vector<double> theta0;
    std::vector<double> theta1;
    std::vector<double> current0;  // edge x -> x+1, length N-1
    std::vector<double> current1;
    double current_total = 0.0;
};

inline MicroProfile micro_profile(const ModelParams& params)
{
    const auto p = validate(params);
    const auto rho = p.reservoir.as_array();
    auto dot = [&](const AbsorptionRow& row) {
        return row[0] * rho[0] + row[1] * rho[1] + row[2] * rho[2] + row[3] * rho[3];
    };
    MicroProfile out;
    const double e = p.epsilon;
    if (e == 0.0) {
        const auto table = absorption_closed_eps0(p);
        for (std::size_t x = 0; x < table.bottom.size(); ++x) {
            out.theta0.push_back(dot(table.bottom[x]));
            out.theta1.push_back(dot(table.top[x]));
        }
        const double g = p.switch_rate();
        const double denom = 1.0 + p.n_sites + 2.0 * p.n_sites * g;
        out.current_total = -(1.0 + g) / denom * (rho[2] - rho[0]) - g / denom * (rho[3] - rho[1]);
    } else {
        const auto c = c_vectors(p);
        for (int x = 1; x <= p.n_sites; ++x) {
            out.theta0.push_back(dot(c.bottom_row(x)));
            out.theta1.push_back(dot(c.top_row(x)));
        }
        out.current_total = -(1.0 + e) * dot(c.slope);
    }
    for (std::size_t x = 0; x + 1 < out.theta0.size(); ++x) {
        out.current0.push_back(out.theta0[x] - out.theta0[x + 1]);
        out.current1.push_back(e * (out.theta1[x] - out.theta1[x + 1]));
    }
    return out;
}

} // namespace swips
