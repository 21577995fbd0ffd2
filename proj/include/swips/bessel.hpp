#pragma once

#include <cmath>
#include <numbers>

namespace swips {

namespace detail {

constexpr double bessel_series_limit = 15.0;

// e^{-x} I_nu(x) / x^nu-free asymptotic sum, nu in {0,1}, x > bessel_series_limit.
inline double bessel_asymptotic_scaled(int nu, double x)
{
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double next = -term * (mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (8.0 * k * x);
        if (std::abs(next) >= std::abs(term)) {
            break;
        }
        term = next;
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) {
            break;
        }
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

// sum_k (x^2/4)^k / (k! (k+nu)!)
inline double bessel_series_core(int nu, double x)
{
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = term;
    for (int k = 1; k < 500; ++k) {
        term *= q / (static_cast<double>(k) * static_cast<double>(k + nu));
        sum += term;
        if (term < 1e-17 * sum) {
            break;
        }
    }
    return sum;
}

} // namespace detail

// e^{-|x|} I0(x)
inline double bessel_i0_scaled(double x)
{
    x = std::abs(x);
    if (x <= detail::bessel_series_limit) {
        return std::exp(-x) * detail::bessel_series_core(0, x);
    }
    return detail::bessel_asymptotic_scaled(0, x);
}

// e^{-|x|} I1(x) / x, finite at x = 0 (value 1/2)
inline double bessel_i1_over_x_scaled(double x)
{
    x = std::abs(x);
    if (x <= detail::bessel_series_limit) {
        return 0.5 * std::exp(-x) * detail::bessel_series_core(1, x);
    }
    return detail::bessel_asymptotic_scaled(1, x) / x;
}

// e^{-|x|} I1(x)
inline double bessel_i1_scaled(double x)
{
    return (x < 0 ? -1.0 : 1.0) * std::abs(x) * bessel_i1_over_x_scaled(x);
}

inline double bessel_i0(double x) { return std::exp(std::abs(x)) * bessel_i0_scaled(x); }
inline double bessel_i1(double x) { return std::exp(std::abs(x)) * bessel_i1_scaled(x); }

} // namespace swips
