#pragma once

#include "error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <string>
#include <vector>

namespace swips {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
};

namespace detail {

struct KronrodPiece {
    double a, b, value, error;
    bool operator<(const KronrodPiece& other) const { return error < other.error; }
};

// 7-point Gauss / 15-point Kronrod pair on [a, b].
template <class F>
KronrodPiece gauss_kronrod_15(F& f, double a, double b)
{
    static constexpr std::array<double, 8> nodes = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr std::array<double, 8> kronrod = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr std::array<double, 4> gauss = {
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const double centre = f(mid);
    double k_sum = kronrod[7] * centre;
    double g_sum = gauss[3] * centre;
    for (std::size_t i = 0; i < 7; ++i) {
        const double dx = half * nodes[i];
        const double pair = f(mid - dx) + f(mid + dx);
        k_sum += kronrod[i] * pair;
        if (i % 2 == 1) {
            g_sum += gauss[i / 2] * pair;
        }
    }
    return {a, b, k_sum * half, std::abs((k_sum - g_sum) * half)};
}

} // namespace detail

// Globally adaptive Gauss-Kronrod; throws QUADRATURE when the budget runs out first.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double tolerance = 1e-8,
                           std::size_t max_evaluations = 1'000'000)
{
    QuadratureResult out;
    if (a == b) {
        return out;
    }
    std::priority_queue<detail::KronrodPiece> pieces;
    auto first = detail::gauss_kronrod_15(f, a, b);
    out.evaluations = 15;
    double value = first.value, error = first.error;
    pieces.push(first);
    while (error > tolerance * std::max(1.0, std::abs(value))) {
        if (out.evaluations + 30 > max_evaluations) {
            throw Error(ErrorKind::quadrature, "tolerance not met within " + std::to_string(max_evaluations) +
                                                   " evaluations (error " + std::to_string(error) + ")");
        }
        const auto worst = pieces.top();
        pieces.pop();
        const double m = 0.5 * (worst.a + worst.b);
        const auto left = detail::gauss_kronrod_15(f, worst.a, m);
        const auto right = detail::gauss_kronrod_15(f, m, worst.b);
        out.evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        pieces.push(left);
        pieces.push(right);
    }
    // re-sum to shed the incremental rounding
    value = 0.0;
    error = 0.0;
    while (!pieces.empty()) {
        value += pieces.top().value;
        error += pieces.top().error;
        pieces.pop();
    }
    out.value = value;
    out.error = error;
    return out;
}

} // namespace swips
