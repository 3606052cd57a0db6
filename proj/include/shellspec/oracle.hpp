#pragma once

// Finite-difference reference discretization of the 1D lattice operator and
// of the partial-wave operators, used to cross-check the transfer-matrix and
// oscillation machinery.
//
// Nodes sit at cell centres r_min + (j + 1/2) h, shells on cell faces. The
// radial problem is discretized for the original radial function
// f = u / r^{(nu-1)/2} in flux form
//   -(1/r^{nu-1}) (r^{nu-1} f')' + l(l+nu-2)/r^2 f = E f,
// which makes the origin a natural boundary. At a shell the two ghost values
// are eliminated with the interface condition on (f, f').

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shellspec/errors.hpp"
#include "shellspec/interaction.hpp"
#include "shellspec/linalg.hpp"
#include "shellspec/radial.hpp"

namespace shellspec {

struct OracleDomain {
    double r_min = 0.0;
    double r_max = 0.0;
    bool periodic = false;  ///< 1D only: wrap [r_min, r_max)
};

/// Tridiagonal operator T (row j couples j-1, j, j+1) plus the wrap-around
/// entries of a periodic box.
struct DiscretizedOperator {
    double grid_step = 0.0;
    double r_min = 0.0;
    double r_max = 0.0;
    std::optional<ChannelSpec> channel;  ///< empty for the 1D lattice operator
    bool periodic = false;
    std::vector<double> diag;
    std::vector<double> upper;  ///< T(j, j+1)
    std::vector<double> lower;  ///< T(j+1, j)
    double wrap_first_last = 0.0;
    double wrap_last_first = 0.0;

    [[nodiscard]] std::size_t size() const { return diag.size(); }
    [[nodiscard]] double node(std::size_t j) const { return r_min + (static_cast<double>(j) + 0.5) * grid_step; }

    /// True when every off-diagonal product is positive, so T is similar to a
    /// symmetric tridiagonal matrix by diagonal scaling.
    [[nodiscard]] bool symmetrizable() const {
        for (std::size_t j = 0; j < upper.size(); ++j)
            if (!(upper[j] * lower[j] > 0.0)) return false;
        if (periodic) {
            // the cycle product must balance for a diagonal similarity to exist
            double ratio = wrap_first_last / wrap_last_first;
            for (std::size_t j = 0; j < upper.size(); ++j) ratio *= upper[j] / lower[j];
            if (!(wrap_first_last * wrap_last_first > 0.0) || std::abs(ratio - 1.0) > 1e-10) return false;
        }
        return true;
    }

    [[nodiscard]] Eigen::MatrixXd dense() const {
        const auto n = static_cast<Eigen::Index>(size());
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index j = 0; j < n; ++j) m(j, j) = diag[static_cast<std::size_t>(j)];
        for (Eigen::Index j = 0; j + 1 < n; ++j) {
            m(j, j + 1) = upper[static_cast<std::size_t>(j)];
            m(j + 1, j) = lower[static_cast<std::size_t>(j)];
        }
        if (periodic && n > 1) {
            m(0, n - 1) += wrap_first_last;
            m(n - 1, 0) += wrap_last_first;
        }
        return m;
    }
};

namespace detail {

/// Conjugates the (u, u') interface matrix to the (f, f') basis at radius r.
inline Mat2<double> interface_for_f(const InteractionParams& p, const std::optional<ChannelSpec>& ch, double r) {
    const Mat2<double> lam = p.matrix();
    if (!ch) return lam;
    const double pw = 0.5 * (ch->nu - 1);
    if (pw == 0.0) return lam;
    const double a = std::pow(r, pw), b = pw * std::pow(r, pw - 1.0);
    const Mat2<double> s{a, 0.0, b, a};
    return s.inverse() * lam * s;
}

inline bool is_multiple(double x, double h) {
    const double q = x / h;
    return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, std::abs(q));
}

}  // namespace detail

/// Assembles the operator on the domain. The channel selects the radial
/// problem (domain must start at 0, Dirichlet wall at r_max); without a
/// channel the 1D lattice operator is built with Dirichlet walls or, if
/// requested, periodic wrap.
[[nodiscard]] inline DiscretizedOperator discretize(const std::optional<ChannelSpec>& ch, const InteractionParams& p,
                                                    const LatticeGeometry& geom, double grid_step,
                                                    const OracleDomain& dom) {
    const double h = grid_step;
    if (!(h > 0.0)) throw InvalidArgument("grid_step must be positive");
    const double half = 0.5 * geom.d / h;
    if (std::abs(half - std::round(half)) > 1e-9 * std::max(1.0, half) || std::round(half) < 1.0)
        throw GridMisaligned("d / grid_step must be an even integer so shells fall on cell faces");
    if (!(dom.r_max > dom.r_min) || !detail::is_multiple(dom.r_max - dom.r_min, h) ||
        !detail::is_multiple(dom.r_min, h))
        throw GridMisaligned("domain ends must lie on cell faces");
    if (ch && (dom.r_min != 0.0 || dom.periodic)) throw InvalidArgument("radial domains start at 0 and are not periodic");

    DiscretizedOperator op;
    op.grid_step = h;
    op.r_min = dom.r_min;
    op.r_max = dom.r_max;
    op.channel = ch;
    op.periodic = dom.periodic;
    const auto n = static_cast<std::size_t>(std::llround((dom.r_max - dom.r_min) / h));
    if (n < 2) throw GridMisaligned("domain holds fewer than two cells");
    op.diag.assign(n, 0.0);
    op.upper.assign(n - 1, 0.0);
    op.lower.assign(n - 1, 0.0);

    const double pw = ch ? static_cast<double>(ch->nu - 1) : 0.0;
    const double q_coef = ch ? static_cast<double>(ch->l) * (ch->l + ch->nu - 2) : 0.0;
    auto face_weight = [&](double r) { return ch ? std::pow(r, pw) : 1.0; };
    auto node_weight = [&](std::size_t j) { return ch ? std::pow(op.node(j), pw) : 1.0; };
    const double h2 = h * h;

    for (std::size_t j = 0; j < n; ++j) {
        const double r = op.node(j);
        if (ch) op.diag[j] += q_coef / (r * r);
    }

    // Face k sits between node k-1 and node k (k = 0..n).
    for (std::size_t k = 0; k <= n; ++k) {
        const double rf = dom.r_min + static_cast<double>(k) * h;
        const double rho = face_weight(rf);
        const bool boundary = k == 0 || k == n;
        if (boundary) {
            if (dom.periodic) {
                if (k == n) continue;  // the wrap face is handled once at k == 0
                const double wl = node_weight(n - 1), wr = node_weight(0);
                op.diag[n - 1] += rho / (wl * h2);
                op.diag[0] += rho / (wr * h2);
                op.wrap_last_first += -rho / (wl * h2);
                op.wrap_first_last += -rho / (wr * h2);
                continue;
            }
            if (rho == 0.0) continue;  // natural boundary at the origin
            // Dirichlet wall: ghost = -f
            const std::size_t j = k == 0 ? 0 : n - 1;
            op.diag[j] += 2.0 * rho / (node_weight(j) * h2);
            continue;
        }
        const std::size_t jl = k - 1, jr = k;
        const double wl = node_weight(jl), wr = node_weight(jr);
        // is there a shell on this face?
        const long site = geom.first_site_after(rf - 0.25 * h);
        const bool on_shell = std::abs(geom.site(site) - rf) <= 0.25 * h;
        if (!on_shell || p.is_free()) {
            op.diag[jl] += rho / (wl * h2);
            op.diag[jr] += rho / (wr * h2);
            op.upper[jl] += -rho / (wl * h2);
            op.lower[jl] += -rho / (wr * h2);
            continue;
        }
        // Left limit at the face: (f_l + g_l)/2, (g_l - f_l)/h with ghost g_l;
        // right limit: (g_r + f_r)/2, (f_r - g_r)/h. Impose right = Lam * left.
        const Mat2<double> lam = detail::interface_for_f(p, ch, rf);
        const Vec2<double> ul{0.5, -1.0 / h}, el{0.5, 1.0 / h}, ur{0.5, 1.0 / h}, er{0.5, -1.0 / h};
        const Vec2<double> lam_el = lam * el, lam_ul = lam * ul;
        // [-Lam el | er] (g_l, g_r)^T = Lam ul f_l - ur f_r
        const Mat2<double> k2 = Mat2<double>::from_columns(-1.0 * lam_el, er);
        const double det = k2.det();
        if (std::abs(det) < 1e-12 * std::max(1.0, norm(lam_el)) / h)
            throw GridMisaligned("interface elimination is singular at r = " + format_double(rf));
        const Mat2<double> kinv = k2.inverse();
        const Vec2<double> from_fl = kinv * lam_ul;
        const Vec2<double> from_fr = kinv * (-1.0 * ur);
        // g_l = from_fl.value f_l + from_fr.value f_r ; g_r = from_fl.derivative f_l + from_fr.derivative f_r
        // row jl: -(1/(wl h^2)) rho (g_l - f_l)
        op.diag[jl] += -rho / (wl * h2) * (from_fl.value - 1.0);
        op.upper[jl] += -rho / (wl * h2) * from_fr.value;
        // row jr: +(1/(wr h^2)) rho (f_r - g_r)
        op.diag[jr] += rho / (wr * h2) * (1.0 - from_fr.derivative);
        op.lower[jl] += -rho / (wr * h2) * from_fl.derivative;
    }
    return op;
}

/// Radial operator on (0, r_max) with the default grid d / 64.
[[nodiscard]] inline DiscretizedOperator discretize_channel(const ChannelSpec& ch, const InteractionParams& p,
                                                            const LatticeGeometry& geom, double r_max,
                                                            int per_cell = 64) {
    return discretize(ch, p, geom, geom.d / per_cell, OracleDomain{0.0, r_max, false});
}

// ---------------------------------------------------------------------------
// Eigenvalues

namespace detail {

inline std::vector<double> dense_real_spectrum(const DiscretizedOperator& op) {
    const Eigen::MatrixXd m = op.dense();
    std::vector<double> out;
    bool symmetric = true;
    for (Eigen::Index i = 0; i < m.rows() && symmetric; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-12 * (std::abs(m(i, j)) + std::abs(m(j, i)) + 1.0)) {
                symmetric = false;
                break;
            }
    if (symmetric) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw ConvergenceFailure("symmetric eigensolver failed");
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
        if (es.info() != Eigen::Success) throw ConvergenceFailure("general eigensolver failed");
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            const auto z = es.eigenvalues()(i);
            if (std::abs(z.imag()) > 1e-8 * std::max(1.0, std::abs(z.real())))
                throw ConvergenceFailure("discretization produced a complex eigenvalue");
            out.push_back(z.real());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

/// Number of eigenvalues strictly below x (Sturm sequence on the symmetrized
/// tridiagonal form, dense fallback otherwise).
[[nodiscard]] inline int count_below(const DiscretizedOperator& op, double x) {
    if (op.periodic || !op.symmetrizable()) {
        const auto ev = detail::dense_real_spectrum(op);
        return static_cast<int>(std::lower_bound(ev.begin(), ev.end(), x) - ev.begin());
    }
    int count = 0;
    double dprev = 1.0;
    const double tiny = std::numeric_limits<double>::min() * 1e10;
    for (std::size_t j = 0; j < op.size(); ++j) {
        double dj = op.diag[j] - x;
        if (j > 0) dj -= op.upper[j - 1] * op.lower[j - 1] / dprev;
        if (dj == 0.0) dj = -tiny;
        if (dj < 0.0) ++count;
        dprev = dj;
    }
    return count;
}

/// Gershgorin enclosure of the spectrum.
[[nodiscard]] inline std::pair<double, double> spectral_bounds(const DiscretizedOperator& op) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    const std::size_t n = op.size();
    for (std::size_t j = 0; j < n; ++j) {
        double rad = 0.0;
        if (j > 0) rad += std::abs(op.lower[j - 1]);
        if (j + 1 < n) rad += std::abs(op.upper[j]);
        if (op.periodic && j == 0) rad += std::abs(op.wrap_first_last);
        if (op.periodic && j + 1 == n) rad += std::abs(op.wrap_last_first);
        lo = std::min(lo, op.diag[j] - rad);
        hi = std::max(hi, op.diag[j] + rad);
    }
    return {lo, hi};
}

/// The k-th eigenvalue (0-based) by bisection on count_below.
[[nodiscard]] inline double kth_eigenvalue(const DiscretizedOperator& op, int k) {
    if (k < 0 || static_cast<std::size_t>(k) >= op.size()) throw InvalidArgument("eigenvalue index out of range");
    if (op.periodic || !op.symmetrizable()) return detail::dense_real_spectrum(op)[static_cast<std::size_t>(k)];
    auto [lo, hi] = spectral_bounds(op);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (count_below(op, mid) > k ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

[[nodiscard]] inline std::vector<double> lowest_eigenvalues(const DiscretizedOperator& op, int k) {
    if (k < 1) throw InvalidArgument("lowest_eigenvalues requires k >= 1");
    if (static_cast<std::size_t>(k) > op.size()) throw InvalidArgument("more eigenvalues requested than grid nodes");
    if (op.periodic || !op.symmetrizable()) {
        auto ev = detail::dense_real_spectrum(op);
        ev.resize(static_cast<std::size_t>(k));
        return ev;
    }
    std::vector<double> out;
    for (int i = 0; i < k; ++i) out.push_back(kth_eigenvalue(op, i));
    return out;
}

/// Eigenvalues in (lo, hi).
[[nodiscard]] inline std::vector<double> eigenvalues_in(const DiscretizedOperator& op, double lo, double hi) {
    const int a = count_below(op, lo), b = count_below(op, hi);
    std::vector<double> out;
    for (int k = a; k < b; ++k) out.push_back(kth_eigenvalue(op, k));
    return out;
}

/// Second-order Richardson step from grids h and h/2.
[[nodiscard]] inline double richardson(double e_h, double e_h2) { return (4.0 * e_h2 - e_h) / 3.0; }

/// Channel eigenvalues in (lo, hi) from grids d/per_cell and d/(2 per_cell),
/// matched by global index and extrapolated. The fine-grid count decides
/// which indices are reported.
[[nodiscard]] inline std::vector<double> oracle_channel_eigenvalues(const ChannelSpec& ch, const InteractionParams& p,
                                                                    const LatticeGeometry& geom, double r_max,
                                                                    double lo, double hi, int per_cell = 64) {
    const auto coarse = discretize_channel(ch, p, geom, r_max, per_cell);
    const auto fine = discretize_channel(ch, p, geom, r_max, 2 * per_cell);
    const int a = count_below(fine, lo), b = count_below(fine, hi);
    std::vector<double> out;
    for (int k = a; k < b; ++k) out.push_back(richardson(kth_eigenvalue(coarse, k), kth_eigenvalue(fine, k)));
    return out;
}

/// Lowest eigenvalue of the 1D lattice operator on a periodic box of n_cells,
/// extrapolated from d/per_cell and d/(2 per_cell).
[[nodiscard]] inline double periodic_box_ground_state(const InteractionParams& p, const LatticeGeometry& geom,
                                                      int n_cells, int per_cell = 32) {
    const OracleDomain dom{0.0, n_cells * geom.d, true};
    const auto c = discretize(std::nullopt, p, geom, geom.d / per_cell, dom);
    const auto f = discretize(std::nullopt, p, geom, geom.d / (2 * per_cell), dom);
    return richardson(lowest_eigenvalues(c, 1)[0], lowest_eigenvalues(f, 1)[0]);
}

}  // namespace shellspec
