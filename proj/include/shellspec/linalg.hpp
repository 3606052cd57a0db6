#pragma once

// Fixed-size 2x2 algebra over real or complex scalars. The boundary-data
// basis is always (value, derivative).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <type_traits>

namespace shellspec {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

template <class T>
struct Vec2 {
    T value{};
    T derivative{};

    friend Vec2 operator+(const Vec2& a, const Vec2& b) { return {a.value + b.value, a.derivative + b.derivative}; }
    friend Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.value - b.value, a.derivative - b.derivative}; }
    friend Vec2 operator*(T s, const Vec2& a) { return {s * a.value, s * a.derivative}; }
};

template <class T>
[[nodiscard]] inline double norm(const Vec2<T>& v) {
    return std::hypot(std::abs(v.value), std::abs(v.derivative));
}

/// Row-major 2x2 matrix [[a, b], [c, d]].
template <class T>
struct Mat2 {
    T a{1}, b{0}, c{0}, d{1};

    [[nodiscard]] static Mat2 identity() { return {T(1), T(0), T(0), T(1)}; }

    [[nodiscard]] T det() const { return a * d - b * c; }
    [[nodiscard]] T trace() const { return a + d; }

    /// Inverse of a unimodular matrix.
    [[nodiscard]] Mat2 unimodular_inverse() const { return {d, -b, -c, a}; }

    [[nodiscard]] Mat2 inverse() const {
        const T den = det();
        return {d / den, -b / den, -c / den, a / den};
    }

    friend Mat2 operator*(const Mat2& x, const Mat2& y) {
        return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
    }
    friend Vec2<T> operator*(const Mat2& m, const Vec2<T>& v) {
        return {m.a * v.value + m.b * v.derivative, m.c * v.value + m.d * v.derivative};
    }
    friend Mat2 operator*(T s, const Mat2& m) { return {s * m.a, s * m.b, s * m.c, s * m.d}; }

    [[nodiscard]] Vec2<T> column(int j) const { return j == 0 ? Vec2<T>{a, c} : Vec2<T>{b, d}; }
    [[nodiscard]] static Mat2 from_columns(const Vec2<T>& c0, const Vec2<T>& c1) {
        return {c0.value, c1.value, c0.derivative, c1.derivative};
    }
};

/// Largest singular value of a 2x2 matrix.
template <class T>
[[nodiscard]] inline double spectral_norm(const Mat2<T>& m) {
    const double scale = std::max({std::abs(m.a), std::abs(m.b), std::abs(m.c), std::abs(m.d)});
    if (scale == 0.0) return 0.0;
    const std::complex<double> a = std::complex<double>(m.a) / scale, b = std::complex<double>(m.b) / scale,
                               c = std::complex<double>(m.c) / scale, d = std::complex<double>(m.d) / scale;
    const double fro2 = std::norm(a) + std::norm(b) + std::norm(c) + std::norm(d);
    const double adet = std::abs(a * d - b * c);
    // s1^2 + s2^2 = fro2, s1 s2 = |det|
    const double disc = std::sqrt(std::max(0.0, (fro2 - 2.0 * adet) * (fro2 + 2.0 * adet)));
    return scale * std::sqrt(0.5 * (fro2 + disc));
}

/// u.value * v.derivative - u.derivative * v.value
template <class T>
[[nodiscard]] inline T wronskian(const Vec2<T>& u, const Vec2<T>& v) {
    return u.value * v.derivative - u.derivative * v.value;
}

}  // namespace shellspec
