#pragma once

// Reference computations that share no code path with the library: plain
// index loops, closed forms, and an extended-precision solver for the
// entropy projection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dras/tensor.hpp"

namespace dras::oracle {

/// Visits every multi-index of `shape` in row-major order.
template <class F>
void for_each_index(const Shape& shape, F&& f) {
    Index index(shape.size(), 0);
    std::size_t total = 1;
    for (auto n : shape) total *= n;
    for (std::size_t flat = 0; flat < total; ++flat) {
        f(index, flat);
        for (std::size_t k = shape.size(); k-- > 0;) {
            if (++index[k] < shape[k]) break;
            index[k] = 0;
        }
    }
}

/// Margin over axis d by explicit index bookkeeping.
inline std::vector<double> margin_by_loops(const Shape& shape, std::span<const double> values,
                                           std::size_t d) {
    Shape reduced;
    for (std::size_t k = 0; k < shape.size(); ++k)
        if (k != d) reduced.push_back(shape[k]);
    std::size_t total = 1;
    for (auto n : reduced) total *= n;
    std::vector<double> out(total, 0.0);
    for_each_index(shape, [&](const Index& index, std::size_t flat) {
        std::size_t target = 0;
        for (std::size_t k = 0, pos = 0; k < shape.size(); ++k) {
            if (k == d) continue;
            target = target * reduced[pos++] + index[k];
        }
        out[target] += values[flat];
    });
    return out;
}

inline double frobenius_by_loops(std::span<const double> a, std::span<const double> b) {
    long double acc = 0.0L;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const long double diff = static_cast<long double>(a[k]) - b[k];
        acc += diff * diff;
    }
    return static_cast<double>(std::sqrt(acc));
}

inline double margin_residual_by_loops(const Shape& shape, std::span<const double> x,
                                       const std::vector<std::vector<double>>& targets) {
    long double acc = 0.0L;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        const auto m = margin_by_loops(shape, x, d);
        for (std::size_t k = 0; k < m.size(); ++k) {
            const long double diff = static_cast<long double>(m[k]) - targets[d][k];
            acc += diff * diff;
        }
    }
    return static_cast<double>(std::sqrt(acc));
}

/// Straight-line 2x2 biproportional fitting in extended precision, run
/// until the margin mismatch is below 1e-14 (or the sweep budget ends).
inline std::array<long double, 4> ipf_2x2(std::array<long double, 4> x, std::array<long double, 2> rows,
                                         std::array<long double, 2> cols) {
    for (int sweep = 0; sweep < 100000; ++sweep) {
        for (int j = 0; j < 2; ++j) {
            const long double s = x[j] + x[2 + j];
            x[j] *= cols[j] / s;
            x[2 + j] *= cols[j] / s;
        }
        for (int i = 0; i < 2; ++i) {
            const long double s = x[2 * i] + x[2 * i + 1];
            x[2 * i] *= rows[i] / s;
            x[2 * i + 1] *= rows[i] / s;
        }
        const long double c0 = x[0] + x[2] - cols[0];
        const long double c1 = x[1] + x[3] - cols[1];
        if (std::sqrt(c0 * c0 + c1 * c1) < 1e-14L) break;
    }
    return x;
}

/// KL projection of a positive 2x2x2 tensor `m` onto the set of tensors
/// sharing all three 2-D margins with the positive tensor `feasible`.
/// That set is the line feasible + t*v with v = (-1)^(i+j+k); along it
/// sum v*log(x/m) is strictly increasing, so bisection finds the unique
/// stationary point of the convex objective.
inline std::array<double, 8> kl_projection_2x2x2(std::span<const double> m, std::span<const double> feasible) {
    std::array<long double, 8> v{};
    long double lo = -1e300L, hi = 1e300L;
    for (std::size_t c = 0; c < 8; ++c) {
        const int parity = static_cast<int>(((c >> 2) & 1) + ((c >> 1) & 1) + (c & 1));
        v[c] = parity % 2 == 0 ? 1.0L : -1.0L;
        // feasible[c] + t*v[c] > 0
        if (v[c] > 0) lo = std::max(lo, -static_cast<long double>(feasible[c]));
        else hi = std::min(hi, static_cast<long double>(feasible[c]));
    }
    auto gradient = [&](long double t) {
        long double g = 0.0L;
        for (std::size_t c = 0; c < 8; ++c) g += v[c] * std::log((feasible[c] + t * v[c]) / m[c]);
        return g;
    };
    for (int it = 0; it < 400; ++it) {
        const long double mid = 0.5L * (lo + hi);
        if (gradient(mid) > 0) hi = mid;
        else lo = mid;
    }
    const long double t = 0.5L * (lo + hi);
    std::array<double, 8> x{};
    for (std::size_t c = 0; c < 8; ++c) x[c] = static_cast<double>(feasible[c] + t * v[c]);
    return x;
}

/// sum_{k=0..terms} A^k for a row-major n x n matrix.
inline std::vector<double> neumann_series(std::span<const double> a, std::size_t n, std::size_t terms) {
    std::vector<double> sum(n * n, 0.0), power(n * n, 0.0), next(n * n);
    for (std::size_t i = 0; i < n; ++i) sum[i * n + i] = power[i * n + i] = 1.0;
    for (std::size_t k = 1; k <= terms; ++k) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t l = 0; l < n; ++l) acc += power[i * n + l] * a[l * n + j];
                next[i * n + j] = acc;
            }
        power.swap(next);
        for (std::size_t q = 0; q < n * n; ++q) sum[q] += power[q];
    }
    return sum;
}

}  // namespace dras::oracle
