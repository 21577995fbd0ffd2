#pragma once

#include "error.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace swips {

struct Mat2 {
    double a00 = 0.0, a01 = 0.0, a10 = 0.0, a11 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 diagonal(double d0, double d1) { return {d0, 0.0, 0.0, d1}; }

    double det() const { return a00 * a11 - a01 * a10; }

    Mat2 inverse() const
    {
        const double d = det();
        if (d == 0.0 || !std::isfinite(d)) {
            throw Error(ErrorKind::singular, "singular 2x2 block");
        }
        return {a11 / d, -a01 / d, -a10 / d, a00 / d};
    }

    friend Mat2 operator*(const Mat2& x, const Mat2& y)
    {
        return {x.a00 * y.a00 + x.a01 * y.a10, x.a00 * y.a01 + x.a01 * y.a11,
                x.a10 * y.a00 + x.a11 * y.a10, x.a10 * y.a01 + x.a11 * y.a11};
    }
    friend Mat2 operator+(const Mat2& x, const Mat2& y)
    {
        return {x.a00 + y.a00, x.a01 + y.a01, x.a10 + y.a10, x.a11 + y.a11};
    }
    friend Mat2 operator-(const Mat2& x, const Mat2& y)
    {
        return {x.a00 - y.a00, x.a01 - y.a01, x.a10 - y.a10, x.a11 - y.a11};
    }
    friend Mat2 operator*(double s, const Mat2& x) { return {s * x.a00, s * x.a01, s * x.a10, s * x.a11}; }
};

// Two rows (one per layer) by K right-hand-side columns.
template <std::size_t K>
using Block = std::array<std::array<double, K>, 2>;

template <std::size_t K>
Block<K> mul_block(const Mat2& m, const Block<K>& v)
{
    Block<K> out;
    for (std::size_t k = 0; k < K; ++k) {
        out[0][k] = m.a00 * v[0][k] + m.a01 * v[1][k];
        out[1][k] = m.a10 * v[0][k] + m.a11 * v[1][k];
    }
    return out;
}

template <std::size_t K>
Block<K> sub_block(const Block<K>& x, const Block<K>& y)
{
    Block<K> out;
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t k = 0; k < K; ++k) {
            out[r][k] = x[r][k] - y[r][k];
        }
    }
    return out;
}

// Block Thomas factorization for rows  lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1] = rhs[i].
// lower[0] and upper[n-1] are ignored. Factor once, solve many right-hand sides.
class BlockTridiagonal {
public:
    BlockTridiagonal(std::vector<Mat2> lower, const std::vector<Mat2>& diag, std::vector<Mat2> upper)
        : lower_(std::move(lower)), upper_(std::move(upper))
    {
        const std::size_t n = diag.size();
        if (n == 0 || lower_.size() != n || upper_.size() != n) {
            throw Error(ErrorKind::singular, "block system shape mismatch");
        }
        pivot_inv_.resize(n);
        sweep_.resize(n);
        pivot_inv_[0] = diag[0].inverse();
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) {
                pivot_inv_[i] = (diag[i] - lower_[i] * sweep_[i - 1]).inverse();
            }
            if (i + 1 < n) {
                sweep_[i] = pivot_inv_[i] * upper_[i];
            }
        }
    }

    std::size_t size() const { return pivot_inv_.size(); }

    template <std::size_t K>
    std::vector<Block<K>> solve(std::vector<Block<K>> rhs) const
    {
        const std::size_t n = size();
        rhs[0] = mul_block(pivot_inv_[0], rhs[0]);
        for (std::size_t i = 1; i < n; ++i) {
            rhs[i] = mul_block(pivot_inv_[i], sub_block(rhs[i], mul_block(lower_[i], rhs[i - 1])));
        }
        for (std::size_t i = n - 1; i-- > 0;) {
            rhs[i] = sub_block(rhs[i], mul_block(sweep_[i], rhs[i + 1]));
        }
        return rhs;
    }

private:
    std::vector<Mat2> lower_;
    std::vector<Mat2> upper_;
    std::vector<Mat2> pivot_inv_;
    std::vector<Mat2> sweep_;
};

} // namespace swips
