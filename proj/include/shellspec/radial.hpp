#pragma once

// Partial-wave propagation for -u'' + (c/r^2) u = E u with the shell
// interaction at every site: scaled solutions, transfer matrices, Wronskians,
// Pruefer phase tracking and Wronskian-zero eigenvalue counting.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "shellspec/errors.hpp"
#include "shellspec/interaction.hpp"
#include "shellspec/kronig1d.hpp"
#include "shellspec/linalg.hpp"
#include "shellspec/ode.hpp"

namespace shellspec {

/// Angular channel: space dimension nu and angular momentum l.
struct ChannelSpec {
    int nu = 3;
    int l = 0;
    double c = 0.0;  ///< (nu-1)(nu-3)/4 + l(l+nu-2)

    ChannelSpec() = default;
    ChannelSpec(int space_dim, int ang_mom) : nu(space_dim), l(ang_mom) {
        if (space_dim < 2) throw InvalidArgument("space dimension must be >= 2");
        if (ang_mom < 0) throw InvalidArgument("angular momentum must be >= 0");
        // integer numerator keeps c exact
        const long num = static_cast<long>(nu - 1) * (nu - 3) + 4L * l * (l + nu - 2);
        c = static_cast<double>(num) / 4.0;
    }
};

enum class OriginCondition { Regular2D, Dirichlet3D, None };

[[nodiscard]] inline const char* to_string(OriginCondition o) {
    switch (o) {
        case OriginCondition::Regular2D: return "Regular2D";
        case OriginCondition::Dirichlet3D: return "Dirichlet3D";
        case OriginCondition::None: return "None";
    }
    return "?";
}

[[nodiscard]] inline OriginCondition origin_condition(const ChannelSpec& ch) {
    if (ch.nu == 2 && ch.l == 0) return OriginCondition::Regular2D;
    if (ch.nu == 3 && ch.l == 0) return OriginCondition::Dirichlet3D;
    return OriginCondition::None;
}

/// Solution stored as a unit vector times exp(log_scale).
template <class T = double>
struct ScaledState {
    Vec2<T> unit{T(0), T(1)};
    double log_scale = 0.0;
    double position = 0.0;

    [[nodiscard]] Vec2<T> value() const { return std::exp(log_scale) * unit; }
};

template <class T>
[[nodiscard]] inline ScaledState<T> make_scaled(const Vec2<T>& f, double position, double log_scale = 0.0) {
    const double n = norm(f);
    if (!(n > 0.0) || !std::isfinite(n)) throw BasisZero("solution vector is zero or not finite");
    return {(1.0 / n) * f, log_scale + std::log(n), position};
}

struct TransferMatrix {
    Mat2<double> entries;
    double energy = 0.0;
    double from = 0.0;
    double to = 0.0;
};

/// (u, u') at a position, for position-checked Wronskians.
struct PointState {
    Vec2<double> f;
    double position = 0.0;
};

[[nodiscard]] inline double wronskian(const PointState& u, const PointState& v) {
    if (u.position != v.position) throw PositionMismatch("wronskian of states at different positions");
    return wronskian(u.f, v.f);
}

/// Tolerance for transits over many shells (phase and Wronskian tracking).
inline constexpr ode::Tolerance kLongRangeTolerance{1e-12, 1e-14, 5'000'000};

namespace detail {

template <class T>
inline Vec2<T> flow(double c, T energy, double from, double to, const Vec2<T>& f, const ode::Tolerance& tol,
                    double* h_hint) {
    if (from == to) return f;
    if (c == 0.0) return free_propagator<T>(energy, to - from) * f;
    auto rhs = [c, energy](double r, const ode::State<T, 2>& y) {
        return ode::State<T, 2>{y[1], (c / (r * r) - energy) * y[0]};
    };
    const auto y = ode::integrate<T, 2>(rhs, from, to, ode::State<T, 2>{f.value, f.derivative}, tol, h_hint);
    return {y[0], y[1]};
}

template <class T>
inline void renormalize(ScaledState<T>& s) {
    const double n = norm(s.unit);
    if (!(n > 0.0) || !std::isfinite(n)) throw StepFailure("solution lost at r = " + std::to_string(s.position));
    s.unit = (1.0 / n) * s.unit;
    s.log_scale += std::log(n);
}

inline void check_radius(const ChannelSpec& ch, double r, const char* what) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidArgument(std::string(what) + " must be a finite radius >= 0");
    if (r == 0.0 && ch.c != 0.0) throw InvalidArgument(std::string(what) + " = 0 is singular for this channel");
}

}  // namespace detail

/// Free flow of the radial equation from `from` to `to` (either direction),
/// no interaction applied. Exact for c = 0.
template <class T = double>
[[nodiscard]] inline Vec2<T> propagate_cell(const ChannelSpec& ch, T energy, double from, double to,
                                            const Vec2<T>& f, const ode::Tolerance& tol = {}) {
    detail::check_radius(ch, from, "from");
    detail::check_radius(ch, to, "to");
    return detail::flow<T>(ch.c, energy, from, to, f, tol, nullptr);
}

/// Advances a scaled solution to `to`, crossing sites with the interaction.
/// Forward: the state is a right limit and sites in (position, to] are applied.
/// Backward: the state is a left limit and sites in [to, position) are undone.
template <class T = double>
[[nodiscard]] inline ScaledState<T> propagate(const ChannelSpec& ch, const InteractionParams& p,
                                              const LatticeGeometry& geom, T energy, ScaledState<T> s, double to,
                                              const ode::Tolerance& tol = {}) {
    detail::check_radius(ch, s.position, "start");
    detail::check_radius(ch, to, "end");
    const Mat2<T> lam = p.matrix<T>();
    const Mat2<T> lam_inv = lam.unimodular_inverse();
    double h = 0.0;
    if (to > s.position) {
        for (long n = geom.first_site_after(s.position); geom.site(n) <= to; ++n) {
            const double r = geom.site(n);
            s.unit = lam * detail::flow<T>(ch.c, energy, s.position, r, s.unit, tol, &h);
            s.position = r;
            detail::renormalize(s);
        }
    } else if (to < s.position) {
        long n = geom.first_site_after(s.position) - 1;
        if (n >= 0 && geom.site(n) == s.position) --n;
        for (; n >= 0 && geom.site(n) >= to; --n) {
            const double r = geom.site(n);
            s.unit = lam_inv * detail::flow<T>(ch.c, energy, s.position, r, s.unit, tol, &h);
            s.position = r;
            detail::renormalize(s);
        }
    }
    s.unit = detail::flow<T>(ch.c, energy, s.position, to, s.unit, tol, &h);
    s.position = to;
    detail::renormalize(s);
    return s;
}

/// T(E, x0, x1) mapping (u, u')(x0+) to (u, u')(x1+), sites in (x0, x1] applied.
[[nodiscard]] inline TransferMatrix transfer(const ChannelSpec& ch, const InteractionParams& p,
                                             const LatticeGeometry& geom, double energy, double x0, double x1) {
    if (!(x1 > x0)) throw InvalidArgument("transfer requires x0 < x1");
    const auto c0 = propagate<double>(ch, p, geom, energy, ScaledState<double>{{1.0, 0.0}, 0.0, x0}, x1);
    const auto c1 = propagate<double>(ch, p, geom, energy, ScaledState<double>{{0.0, 1.0}, 0.0, x0}, x1);
    return {Mat2<double>::from_columns(c0.value(), c1.value()), energy, x0, x1};
}

// ---------------------------------------------------------------------------
// Origin behaviour

/// Radius where the regular solution is started for c != 0.
[[nodiscard]] inline double origin_start_radius(const ChannelSpec& ch, const LatticeGeometry& geom, double e_abs) {
    if (ch.c == 0.0) return 0.0;
    const double natural = 0.1 * std::sqrt(std::abs(ch.c) / (e_abs + 1.0));
    return std::max(1e-3 * geom.d, std::min(0.25 * geom.d, natural));
}

/// Regular solution near the origin: Frobenius series r^s sum a_j r^{2j} with
/// s = 1/2 + sqrt(c + 1/4), summed to convergence. For c = 0 the start is
/// (0, 1) at r = 0.
template <class T = double>
[[nodiscard]] inline ScaledState<T> origin_solution(const ChannelSpec& ch, T energy, double r) {
    if (ch.c == 0.0) return {{T(0), T(1)}, 0.0, 0.0};
    if (!(r > 0.0)) throw InvalidArgument("origin start radius must be positive");
    const double s = 0.5 + std::sqrt(ch.c + 0.25);
    T a = T(1), s0 = T(1), s1 = T(s);
    const double r2 = r * r;
    double rp = 1.0;
    for (int j = 1; j < 200; ++j) {
        const double sj = s + 2.0 * j;
        a = -energy * a / (sj * (sj - 1.0) - ch.c);
        rp *= r2;
        const T term = a * rp;
        s0 += term;
        s1 += sj * term;
        if (std::abs(term) * sj < 1e-18 * std::abs(s0)) break;
    }
    // (u, u') = r^{s-1} (r s0, s1)
    return make_scaled<T>(Vec2<T>{r * s0, s1}, r, (s - 1.0) * std::log(r));
}

// ---------------------------------------------------------------------------
// Pruefer phase

/// u = exp(log_rho) sin(theta), u' = exp(log_rho) cos(theta); theta increases
/// through zeros of u.
struct PruferState {
    double theta = 0.0;
    double log_rho = 0.0;
    double position = 0.0;
};

[[nodiscard]] inline PruferState to_prufer(const Vec2<double>& f, double position) {
    const double n = norm(f);
    if (!(n > 0.0)) throw BasisZero("cannot take the phase of a zero vector");
    return {std::atan2(f.value, f.derivative), std::log(n), position};
}

[[nodiscard]] inline Vec2<double> unit_from_prufer(const PruferState& s) {
    return {std::sin(s.theta), std::cos(s.theta)};
}

[[nodiscard]] inline Vec2<double> reconstruct(const PruferState& s) {
    return std::exp(s.log_rho) * unit_from_prufer(s);
}

namespace detail {

inline PruferState prufer_flow(double c, double energy, const PruferState& s, double to, const ode::Tolerance& tol,
                               double* h_hint) {
    if (to == s.position) return s;
    auto rhs = [c, energy](double r, const ode::State<double, 2>& y) {
        const double q = c == 0.0 ? 0.0 : c / (r * r);
        const double sn = std::sin(y[0]), cs = std::cos(y[0]);
        return ode::State<double, 2>{cs * cs + (energy - q) * sn * sn, (1.0 - energy + q) * sn * cs};
    };
    const auto y = ode::integrate<double, 2>(rhs, s.position, to, ode::State<double, 2>{s.theta, s.log_rho}, tol,
                                             h_hint);
    return {y[0], y[1], to};
}

}  // namespace detail

/// Phase jump across a site: the representative of the new angle closest to
/// the incoming one, jump in (-pi, pi].
[[nodiscard]] inline PruferState prufer_jump(const InteractionParams& p, const PruferState& s) {
    if (p.is_free()) return s;
    const Vec2<double> w = p.matrix() * unit_from_prufer(s);
    const double principal = std::atan2(w.value, w.derivative);
    double jump = std::remainder(principal - s.theta, 2.0 * std::numbers::pi);
    if (jump <= -std::numbers::pi) jump += 2.0 * std::numbers::pi;
    return {s.theta + jump, s.log_rho + std::log(norm(w)), s.position};
}

/// Integrates the phase and amplitude to `to` (> position), applying the
/// interaction at each site in (position, to].
[[nodiscard]] inline PruferState prufer_advance(const ChannelSpec& ch, const InteractionParams& p,
                                                const LatticeGeometry& geom, double energy, PruferState s, double to,
                                                const ode::Tolerance& tol = kLongRangeTolerance) {
    if (!(to > s.position)) throw InvalidArgument("prufer_advance requires position < to");
    detail::check_radius(ch, s.position, "start");
    double h = 0.0;
    for (long n = geom.first_site_after(s.position); geom.site(n) <= to; ++n) {
        s = prufer_jump(p, detail::prufer_flow(ch.c, energy, s, geom.site(n), tol, &h));
    }
    return detail::prufer_flow(ch.c, energy, s, to, tol, &h);
}

// ---------------------------------------------------------------------------
// Wronskian transport with QR renormalization

/// Wronskian W[u, v] evaluated at x0 and, after propagating both solutions to
/// x1, at x1. The pair is carried as Q R with log|diag R| accumulated so that
/// exponential growth in gaps does not destroy the determinant.
struct WronskianTransport {
    double w_start = 0.0;
    double w_end = 0.0;
    [[nodiscard]] double relative_drift() const { return std::abs(w_end - w_start) / std::abs(w_start); }
};

[[nodiscard]] inline WronskianTransport transport_wronskian(const ChannelSpec& ch, const InteractionParams& p,
                                                            const LatticeGeometry& geom, double energy,
                                                            const Vec2<double>& u, const Vec2<double>& v, double x0,
                                                            double x1,
                                                            const ode::Tolerance& tol = kLongRangeTolerance) {
    if (!(x1 > x0)) throw InvalidArgument("transport_wronskian requires x0 < x1");
    detail::check_radius(ch, x0, "x0");
    const double w0 = wronskian(u, v);
    if (w0 == 0.0) throw BasisZero("solutions are linearly dependent");

    // Gram-Schmidt on the columns; F = Q R, det F = det Q * r11 * r22
    auto qr = [](Vec2<double>& a, Vec2<double>& b, double& log_det, int& sign) {
        const double r11 = norm(a);
        a = (1.0 / r11) * a;
        const double r12 = a.value * b.value + a.derivative * b.derivative;
        b = b - r12 * a;
        const double r22 = norm(b);
        b = (1.0 / r22) * b;
        log_det += std::log(r11) + std::log(r22);
        if (wronskian(a, b) < 0.0) sign = -sign;  // det Q
        // keep Q a rotation; fold its sign into `sign` by flipping b
        if (wronskian(a, b) < 0.0) b = -1.0 * b;
    };
    Vec2<double> a = u, b = v;
    double log_det = 0.0;
    int sign = 1;
    qr(a, b, log_det, sign);

    const Mat2<double> lam = p.matrix();
    double ha = 0.0, hb = 0.0;
    double pos = x0;
    auto step_to = [&](double r) {
        const double len = r - pos;
        const int m = std::max(1, static_cast<int>(std::ceil(2.0 * len / geom.d)));
        for (int i = 1; i <= m; ++i) {
            const double next = i == m ? r : pos + len * i / m;
            const double prev = i == 1 ? pos : pos + len * (i - 1) / m;
            a = detail::flow<double>(ch.c, energy, prev, next, a, tol, &ha);
            b = detail::flow<double>(ch.c, energy, prev, next, b, tol, &hb);
            qr(a, b, log_det, sign);
        }
        pos = r;
    };
    for (long n = geom.first_site_after(x0); geom.site(n) <= x1; ++n) {
        step_to(geom.site(n));
        a = lam * a;
        b = lam * b;
        qr(a, b, log_det, sign);
    }
    step_to(x1);
    return {w0, sign * std::exp(log_det)};
}

// ---------------------------------------------------------------------------
// Sampled solutions and Wronskian-zero counting

/// Sample point; side -1 / +1 marks the left / right limit at a site.
struct GridPoint {
    double r = 0.0;
    int side = 0;
};

/// Points from r_start to r_end with every site strictly inside recorded
/// twice (both limits) and each piece between breakpoints cut into
/// max(min_sub, ceil(density * length)) substeps.
[[nodiscard]] inline std::vector<GridPoint> make_grid(const LatticeGeometry& geom, double r_start, double r_end,
                                                      double density, int min_sub) {
    if (!(r_end > r_start)) throw InvalidArgument("grid requires r_start < r_end");
    std::vector<double> breaks{r_start};
    for (long n = geom.first_site_after(r_start); geom.site(n) < r_end; ++n) breaks.push_back(geom.site(n));
    breaks.push_back(r_end);
    std::vector<GridPoint> grid{{r_start, 0}};
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k], b = breaks[k + 1], len = b - a;
        const int m = std::max(min_sub, static_cast<int>(std::ceil(density * len)));
        for (int i = 1; i < m; ++i) grid.push_back({a + len * i / m, 0});
        if (k + 2 < breaks.size()) {
            grid.push_back({b, -1});
            grid.push_back({b, +1});
        } else {
            grid.push_back({b, 0});
        }
    }
    return grid;
}

template <class T = double>
struct SampledSolution {
    std::vector<GridPoint> grid;
    std::vector<ScaledState<T>> states;
};

/// Integrates along the grid starting from `start` at grid.front() (forward)
/// or grid.back() (backward). Results are stored in grid order.
template <class T = double>
[[nodiscard]] inline SampledSolution<T> sweep(const ChannelSpec& ch, const InteractionParams& p, T energy,
                                              const std::vector<GridPoint>& grid, ScaledState<T> start, bool forward,
                                              const ode::Tolerance& tol = {}) {
    const std::size_t n = grid.size();
    SampledSolution<T> out{grid, std::vector<ScaledState<T>>(n)};
    const Mat2<T> lam = p.matrix<T>();
    const Mat2<T> lam_inv = lam.unimodular_inverse();
    double h = 0.0;
    ScaledState<T> s = start;
    for (std::size_t step = 0; step < n; ++step) {
        const std::size_t i = forward ? step : n - 1 - step;
        const GridPoint& g = grid[i];
        if (step > 0) {
            if (g.r == s.position) {
                s.unit = forward ? lam * s.unit : lam_inv * s.unit;
            } else {
                s.unit = detail::flow<T>(ch.c, energy, s.position, g.r, s.unit, tol, &h);
                s.position = g.r;
            }
            detail::renormalize(s);
        }
        out.states[i] = s;
    }
    return out;
}

/// Truncation radius (count_hint + 1/2) d. The site sitting there is outside
/// the truncated domain: the Dirichlet wall is at its left.
[[nodiscard]] inline double truncation_radius(const LatticeGeometry& geom) {
    return (geom.count_hint + 0.5) * geom.d;
}

struct RadialDomain {
    double r_min = 0.0;  ///< 0 selects the channel's automatic start radius
    double r_max = 0.0;
};

[[nodiscard]] inline RadialDomain default_domain(const LatticeGeometry& geom) { return {0.0, truncation_radius(geom)}; }

/// Grid density (points per unit length) for Wronskian sampling at energies
/// up to e_abs: at least 8 points per half wave.
[[nodiscard]] inline double sampling_density(const LatticeGeometry& geom, double e_abs) {
    return std::max(16.0 / geom.d, 8.0 * std::sqrt(e_abs + 1.0) / std::numbers::pi);
}

struct ShootingPair {
    SampledSolution<double> left;   ///< regular at the origin, energy e_left
    SampledSolution<double> right;  ///< Dirichlet at r_max, energy e_right
};

[[nodiscard]] inline ShootingPair shoot_pair(const ChannelSpec& ch, const InteractionParams& p,
                                             const LatticeGeometry& geom, double e_left, double e_right,
                                             const RadialDomain& dom) {
    const double e_abs = std::max(std::abs(e_left), std::abs(e_right));
    const double r0 = dom.r_min > 0.0 ? dom.r_min : origin_start_radius(ch, geom, e_abs);
    if (!(dom.r_max > r0)) throw InvalidArgument("r_max must exceed the start radius");
    const auto grid = make_grid(geom, r0, dom.r_max, sampling_density(geom, e_abs), 16);
    auto left_start = origin_solution<double>(ch, e_left, r0);
    left_start.position = r0;
    const ScaledState<double> right_start{{0.0, 1.0}, 0.0, dom.r_max};
    return {sweep<double>(ch, p, e_left, grid, left_start, true),
            sweep<double>(ch, p, e_right, grid, right_start, false)};
}

/// Number of sign changes of W[u1(E1), u2(E2)] over the truncated domain,
/// which equals the number of eigenvalues of the truncated operator in (E1, E2).
[[nodiscard]] inline int count_wronskian_zeros(const ChannelSpec& ch, const InteractionParams& p,
                                               const LatticeGeometry& geom, double e1, double e2,
                                               const RadialDomain& dom, OriginCondition bc) {
    if (!(e1 < e2)) throw InvalidArgument("count_wronskian_zeros requires E1 < E2");
    if (bc != origin_condition(ch)) throw InvalidArgument("origin condition does not match the channel");
    const auto pair = shoot_pair(ch, p, geom, e1, e2, dom);
    int count = 0;
    int last = 0;
    for (std::size_t i = 0; i < pair.left.states.size(); ++i) {
        const double w = wronskian(pair.left.states[i].unit, pair.right.states[i].unit);
        if (!std::isfinite(w)) throw DegenerateEndpoint("Wronskian is not finite");
        const int sg = (w > 0.0) - (w < 0.0);
        if (sg == 0) continue;
        if (last != 0 && sg != last) ++count;
        last = sg;
    }
    if (last == 0) throw DegenerateEndpoint("Wronskian vanishes identically");
    return count;
}

/// Normalized matching Wronskian at x_match between the origin-regular and
/// the r_max-Dirichlet solution at the same energy; zero at eigenvalues and
/// continuous in E.
[[nodiscard]] inline double matching_wronskian(const ChannelSpec& ch, const InteractionParams& p,
                                               const LatticeGeometry& geom, double energy, double x_match,
                                               const RadialDomain& dom) {
    const double r0 = dom.r_min > 0.0 ? dom.r_min : origin_start_radius(ch, geom, std::abs(energy));
    if (!(x_match > r0 && x_match < dom.r_max)) throw InvalidArgument("matching point outside the domain");
    auto left = origin_solution<double>(ch, energy, r0);
    left.position = r0;
    left = propagate<double>(ch, p, geom, energy, left, x_match);
    const auto right = propagate<double>(ch, p, geom, energy, ScaledState<double>{{0.0, 1.0}, 0.0, dom.r_max},
                                         x_match);
    // left is a right limit at x_match, right a left limit; agree when x_match is not a site
    return wronskian(left.unit, right.unit);
}

}  // namespace shellspec
