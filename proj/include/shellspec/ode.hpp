#pragma once

// Dormand-Prince 5(4) embedded Runge-Kutta with adaptive step control.
// State is a fixed-size array of real or complex scalars; integration may run
// in either direction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>

#include "shellspec/errors.hpp"

namespace shellspec::ode {

struct Tolerance {
    double rel = 1e-10;
    double abs = 1e-12;
    std::size_t max_steps = 5'000'000;
};

template <class T, std::size_t N>
using State = std::array<T, N>;

namespace detail {

// Butcher tableau, Dormand & Prince (1980).
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b_hat (error weights)
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

template <class T, std::size_t N>
inline State<T, N> axpy(const State<T, N>& y, double h, std::initializer_list<std::pair<double, const State<T, N>*>> ks) {
    State<T, N> out = y;
    for (const auto& [w, k] : ks)
        for (std::size_t i = 0; i < N; ++i) out[i] += (h * w) * (*k)[i];
    return out;
}

}  // namespace detail

/// Integrates y' = f(x, y) from x0 to x1 and returns y(x1). `h_hint` carries
/// the last accepted step size between calls (0 lets the integrator choose).
template <class T, std::size_t N, class Rhs>
State<T, N> integrate(Rhs&& f, double x0, double x1, State<T, N> y, const Tolerance& tol = {},
                      double* h_hint = nullptr) {
    using namespace detail;
    if (x0 == x1) return y;
    const double dir = x1 > x0 ? 1.0 : -1.0;
    const double span = std::abs(x1 - x0);
    double h = (h_hint && *h_hint > 0.0) ? std::min(*h_hint, span) : std::min(span, 1e-2 * std::max(1.0, span));
    double x = x0;
    State<T, N> k1 = f(x, y);
    std::size_t steps = 0;
    while (dir * (x1 - x) > 0.0) {
        if (++steps > tol.max_steps) throw StepFailure("step budget exhausted at x = " + std::to_string(x));
        bool last = false;
        if (h >= std::abs(x1 - x)) {
            h = std::abs(x1 - x);
            last = true;
        }
        const double hs = dir * h;
        const State<T, N> k2 = f(x + c2 * hs, axpy<T, N>(y, hs, {{a21, &k1}}));
        const State<T, N> k3 = f(x + c3 * hs, axpy<T, N>(y, hs, {{a31, &k1}, {a32, &k2}}));
        const State<T, N> k4 = f(x + c4 * hs, axpy<T, N>(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const State<T, N> k5 = f(x + c5 * hs, axpy<T, N>(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const State<T, N> k6 =
            f(x + hs, axpy<T, N>(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const State<T, N> y_new = axpy<T, N>(y, hs, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const double x_new = last ? x1 : x + hs;
        const State<T, N> k7 = f(x_new, y_new);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const T ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = tol.abs + tol.rel * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err = std::max(err, std::abs(ei) / sc);
        }
        if (!std::isfinite(err)) {
            h *= 0.1;
        } else if (err <= 1.0) {
            x = x_new;
            y = y_new;
            k1 = k7;
            const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (h_hint) *h_hint = h * fac;
            if (!last) h *= fac;
        } else {
            h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
        }
        if (h < 1e-15 * std::max(1.0, std::abs(x)))
            throw StepFailure("step size underflow at x = " + std::to_string(x));
    }
    return y;
}

}  // namespace shellspec::ode
