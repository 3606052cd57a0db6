#pragma once

// Discrete eigenvalues below the essential spectrum for the planar s-wave
// channel (nu = 2, l = 0). The phase of the regular solution at E0 is tracked
// relative to a Floquet basis (u, v) of the 1D lattice operator, and its
// Kepler-transformed version
//   tan(phi) = (tan(gamma) - v/u) / r
// obeys
//   phi' = -(1/r) (sin(phi) cos(phi) + u^2 sin^2(phi) / 4 + cos^2(phi) / u^2)
// between shells, with tan(phi) dropping by beta / (r u(r+) u(r-)) at each
// shell. Unbounded decrease of phi signals infinitely many eigenvalues.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shellspec/errors.hpp"
#include "shellspec/interaction.hpp"
#include "shellspec/kronig1d.hpp"
#include "shellspec/linalg.hpp"
#include "shellspec/ode.hpp"
#include "shellspec/radial.hpp"
#include "shellspec/spectral_map.hpp"

namespace shellspec {

inline const ChannelSpec kWelshChannel{2, 0};

// ---------------------------------------------------------------------------
// Floquet basis at the bottom of the essential spectrum

/// (u, v) solving the 1D lattice equation at E0 with W[u, v] = u v' - u' v = 1,
/// u(r + d) = sigma u(r) and v(r + d) = sigma (v(r) + kappa u(r)).
struct FloquetBasis {
    InteractionParams params = free_interaction();
    double d = 1.0;
    double e0 = 0.0;
    FloquetSymmetry symmetry = FloquetSymmetry::Periodic;
    double sigma = 1.0;
    double kappa = 0.0;
    Vec2<double> u_start;  ///< (u, u') at r = 0
    Vec2<double> v_start;
    double residual = 0.0;  ///< Floquet eigenvector defect plus Wronskian defect

    /// side < 0 selects the left limit at a shell, otherwise the right limit.
    [[nodiscard]] Vec2<double> u(double r, int side = 1) const { return eval(r, side).first; }
    [[nodiscard]] Vec2<double> v(double r, int side = 1) const { return eval(r, side).second; }

    [[nodiscard]] std::pair<Vec2<double>, Vec2<double>> eval(double r, int side = 1) const {
        double n = std::floor(r / d);
        double s = r - n * d;
        // a left limit at the cell start belongs to the previous cell's end
        if (s == 0.0 && side < 0 && r > 0.0) {
            n -= 1.0;
            s = d;
        }
        const double half = 0.5 * d;
        auto local = [&](const Vec2<double>& x) {
            if (s < half || (s == half && side < 0)) return free_propagator<double>(e0, s) * x;
            return free_propagator<double>(e0, s - half) * (params.matrix() * (free_propagator<double>(e0, half) * x));
        };
        const Vec2<double> ul = local(u_start), vl = local(v_start);
        const double sg = std::fmod(std::abs(n), 2.0) == 1.0 ? sigma : 1.0;
        return {sg * ul, sg * (vl + (n * kappa) * ul)};
    }
};

[[nodiscard]] inline FloquetBasis floquet_basis_at_e0(const InteractionParams& p, const LatticeGeometry& geom) {
    const GroundStateReport gs = ground_state_symmetry(p, geom);
    FloquetBasis b;
    b.params = p;
    b.d = geom.d;
    b.e0 = gs.e0;
    b.symmetry = gs.symmetry;
    b.sigma = gs.symmetry == FloquetSymmetry::Periodic ? 1.0 : -1.0;
    // one period starting midway between shells
    const Mat2<double> half = free_propagator<double>(gs.e0, 0.5 * geom.d);
    const Mat2<double> m0 = half * p.matrix() * half;
    auto [w, res] = floquet_eigenvector(m0, b.sigma);
    b.u_start = (1.0 / norm(w)) * w;
    if (b.u_start.value < 0.0 || (b.u_start.value == 0.0 && b.u_start.derivative < 0.0))
        b.u_start = -1.0 * b.u_start;
    const double n2 = b.u_start.value * b.u_start.value + b.u_start.derivative * b.u_start.derivative;
    b.v_start = {-b.u_start.derivative / n2, b.u_start.value / n2};
    const Vec2<double> drift = b.sigma * (m0 * b.v_start) - b.v_start;
    b.kappa = drift.value * b.u_start.value + drift.derivative * b.u_start.derivative;
    const Vec2<double> off = drift - b.kappa * b.u_start;
    b.residual = res + norm(off) + std::abs(wronskian(b.u_start, b.v_start) - 1.0);
    if (!(b.residual < 1e-8)) throw DegenerateEdge("Floquet basis defect " + format_double(b.residual));
    return b;
}

// ---------------------------------------------------------------------------
// Kepler phase trace

struct KeplerTrace {
    std::vector<double> radii;
    std::vector<double> phi;          ///< right limits at shells
    std::vector<double> gamma_phase;  ///< phase of the regular solution in the Floquet basis
    std::vector<double> jumps;        ///< phi jump recorded at each point (0 off shell)
    double jump_sum = 0.0;            ///< sum of |delta tan(phi)| over shells
};

namespace detail {

inline double kepler_rhs(double r, double phi, double u) {
    const double s = std::sin(phi), c = std::cos(phi);
    return -(s * c + 0.25 * u * u * s * s + c * c / (u * u)) / r;
}

/// Representative of x + k pi closest to ref.
inline double nearest_branch(double x, double ref) {
    return x + std::numbers::pi * std::round((ref - x) / std::numbers::pi);
}

/// Phase of y in the basis: y = a (u sin(g) - v cos(g)), a > 0.
inline double gamma_raw(const Vec2<double>& y, const Vec2<double>& u, const Vec2<double>& v) {
    return std::atan2(y.value * v.derivative - y.derivative * v.value, u.derivative * y.value - u.value * y.derivative);
}

inline double unwrap(double raw, double prev) {
    const double two_pi = 2.0 * std::numbers::pi;
    return prev + std::remainder(raw - prev, two_pi);
}

}  // namespace detail

/// Integrates the Kepler phase on [r0, r1] alongside the directly computed
/// phase of the regular E0 solution. Points: r0, `per_cell` samples per
/// period, and every shell (right limit).
[[nodiscard]] inline KeplerTrace kepler_trace(const InteractionParams& p, const LatticeGeometry& geom, double r0,
                                              double r1, int per_cell = 8,
                                              const ode::Tolerance& tol = kLongRangeTolerance) {
    if (!(r0 > 0.0 && r1 > r0)) throw InvalidArgument("kepler_trace requires 0 < r0 < r1");
    if (per_cell < 1) throw InvalidArgument("per_cell must be positive");
    const FloquetBasis basis = floquet_basis_at_e0(p, geom);
    const double e0 = basis.e0;
    const ChannelSpec& ch = kWelshChannel;

    // regular solution at E0 carried to r0 (right limit)
    const double rs = std::min(origin_start_radius(ch, geom, std::abs(e0)), 0.5 * r0);
    auto y = origin_solution<double>(ch, e0, rs);
    y.position = rs;
    y = propagate<double>(ch, p, geom, e0, y, r0, tol);

    // sample radii: regular samples and shells, shells flagged
    std::vector<std::pair<double, bool>> pts;
    const double step = geom.d / per_cell;
    for (double k = std::floor(r0 / step) + 1.0;; k += 1.0) {
        const double r = k * step;
        if (r >= r1) break;
        pts.emplace_back(r, false);
    }
    for (long n = geom.first_site_after(r0); geom.site(n) <= r1; ++n) pts.emplace_back(geom.site(n), true);
    pts.emplace_back(r1, false);
    std::sort(pts.begin(), pts.end());
    // merge samples that coincide with a shell up to rounding, keeping the shell
    std::vector<std::pair<double, bool>> merged;
    for (const auto& pt : pts) {
        if (!merged.empty() && pt.first - merged.back().first <= 1e-9 * geom.d) {
            if (pt.second) merged.back() = pt;
            continue;
        }
        merged.push_back(pt);
    }
    pts = std::move(merged);

    KeplerTrace tr;
    auto [u0, v0] = basis.eval(r0, 1);
    double gamma = detail::gamma_raw(y.unit, u0, v0);
    const double t0 = (std::tan(gamma) - v0.value / u0.value) / r0;
    double phi = detail::nearest_branch(std::atan(t0), gamma);
    tr.radii.push_back(r0);
    tr.phi.push_back(phi);
    tr.gamma_phase.push_back(gamma);
    tr.jumps.push_back(0.0);

    double pos = r0, h_hint = 0.0;
    const bool jumps = p.beta() != 0.0;
    for (const auto& [r, shell] : pts) {
        auto rhs = [&](double x, const ode::State<double, 1>& s) -> ode::State<double, 1> {
            const double uu = basis.u(x, x <= pos ? 1 : -1).value;
            if (uu == 0.0) throw BasisZero("Floquet solution vanishes at r = " + format_double(x));
            return {detail::kepler_rhs(x, s[0], uu)};
        };
        phi = ode::integrate<double, 1>(rhs, pos, r, {phi}, tol, &h_hint)[0];
        double jump = 0.0;
        if (shell && jumps) {
            const double um = basis.u(r, -1).value, up = basis.u(r, 1).value;
            if (um == 0.0 || up == 0.0) throw BasisZero("Floquet solution vanishes at the shell r = " + format_double(r));
            const double dtan = -p.beta() / (r * up * um);
            const double cand = std::atan(std::tan(phi) + dtan);
            // preimage in (phi - pi, phi]
            double next = detail::nearest_branch(cand, phi - 0.5 * std::numbers::pi);
            if (next > phi) next -= std::numbers::pi;
            if (next <= phi - std::numbers::pi) next += std::numbers::pi;
            jump = next - phi;
            phi = next;
            tr.jump_sum += std::abs(dtan);
        }
        y = propagate<double>(ch, p, geom, e0, y, r, tol);
        const auto [ur, vr] = basis.eval(r, 1);
        gamma = detail::unwrap(detail::gamma_raw(y.unit, ur, vr), gamma);
        tr.radii.push_back(r);
        tr.phi.push_back(phi);
        tr.gamma_phase.push_back(gamma);
        tr.jumps.push_back(jump);
        pos = r;
    }
    return tr;
}

[[nodiscard]] inline std::string to_csv(const KeplerTrace& tr) {
    std::ostringstream os;
    os << "r,phi,gamma,jumps\n";
    for (std::size_t i = 0; i < tr.radii.size(); ++i)
        os << format_double(tr.radii[i]) << ',' << format_double(tr.phi[i]) << ','
           << format_double(tr.gamma_phase[i]) << ',' << format_double(tr.jumps[i]) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Unboundedness heuristic

enum class PhaseVerdict { Unbounded, PlateauSuspected };

[[nodiscard]] inline const char* to_string(PhaseVerdict v) {
    return v == PhaseVerdict::Unbounded ? "Unbounded" : "PlateauSuspected";
}

inline constexpr double kDecadeDropThreshold = 0.1;

struct PhaseWindowDrop {
    double r_lo = 0.0;
    double r_hi = 0.0;
    double drop_per_decade = 0.0;  ///< decrease of phi per decade of r (positive when phi falls)
};

struct PhaseTestResult {
    std::vector<PhaseWindowDrop> windows;
    double drop_per_decade = 0.0;  ///< last window
    PhaseVerdict verdict = PhaseVerdict::PlateauSuspected;
};

/// Decade windows r0 * 10^k, k = 0..decades.
[[nodiscard]] inline std::vector<std::pair<double, double>> decade_windows(double r0, int decades) {
    std::vector<std::pair<double, double>> w;
    for (int k = 0; k < decades; ++k) w.emplace_back(r0 * std::pow(10.0, k), r0 * std::pow(10.0, k + 1));
    return w;
}

namespace detail {

inline double phi_at(const KeplerTrace& tr, double r) {
    const auto it = std::lower_bound(tr.radii.begin(), tr.radii.end(), r);
    const auto i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - tr.radii.begin(),
                                                                     static_cast<std::ptrdiff_t>(tr.radii.size()) - 1));
    return tr.phi[i];
}

inline PhaseTestResult evaluate_windows(const KeplerTrace& tr, const std::vector<std::pair<double, double>>& windows) {
    PhaseTestResult out;
    for (const auto& [a, b] : windows) {
        const double drop = phi_at(tr, a) - phi_at(tr, b);
        out.windows.push_back({a, b, drop / std::log10(b / a)});
    }
    out.drop_per_decade = out.windows.back().drop_per_decade;
    out.verdict = out.drop_per_decade > kDecadeDropThreshold ? PhaseVerdict::Unbounded : PhaseVerdict::PlateauSuspected;
    return out;
}

}  // namespace detail

/// Measures the decrease of phi per decade of r over increasing windows that
/// together span at least three decades. Unbounded when the last window
/// still loses more than 0.1 rad per decade.
[[nodiscard]] inline PhaseTestResult phase_unbounded_test(const InteractionParams& p, const LatticeGeometry& geom,
                                                          const std::vector<std::pair<double, double>>& windows) {
    if (windows.empty()) throw InvalidArgument("phase_unbounded_test needs windows");
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (!(windows[i].first > 0.0 && windows[i].second > windows[i].first))
            throw InvalidArgument("windows must be positive, increasing intervals");
        if (i > 0 && windows[i].first < windows[i - 1].second) throw InvalidArgument("windows must be increasing");
    }
    if (std::log10(windows.back().second / windows.front().first) < 3.0 - 1e-12)
        throw InvalidArgument("windows must span at least three decades");
    const auto tr = kepler_trace(p, geom, windows.front().first, windows.back().second, 4);
    return detail::evaluate_windows(tr, windows);
}

// ---------------------------------------------------------------------------
// Eigenvalue search

struct WelshReport {
    double e0 = 0.0;
    double r_max = 0.0;
    double window_lo = 0.0;
    std::vector<double> eigenvalues_found;
    std::vector<double> matching_defects;
    double phase_drop = 0.0;
    std::pair<double, double> evidence_window{0.0, 0.0};
    double drop_per_decade = 0.0;
    PhaseVerdict verdict = PhaseVerdict::PlateauSuspected;
};

/// Raised when fewer eigenvalues than requested lie below E0 at this
/// truncation; carries what was found.
class FewerThanRequested : public Error {
public:
    FewerThanRequested(WelshReport report, int wanted)
        : Error("FewerThanRequested", ErrorCategory::Numerical,
                "found " + std::to_string(report.eigenvalues_found.size()) + " of " + std::to_string(wanted) +
                    " eigenvalues below E0 at r_max = " + format_double(report.r_max)),
          report_(std::move(report)) {}
    [[nodiscard]] const WelshReport& report() const noexcept { return report_; }

private:
    WelshReport report_;
};

inline constexpr double kWelshMatchTolerance = 1e-6;

/// Energy offset |W / W'| implied by the matching Wronskian at E, relative to
/// max(1, |E|). Unit-vector Wronskians alone are not comparable across
/// states whose weight sits far from the matching point.
[[nodiscard]] inline double matching_defect(const ChannelSpec& ch, const InteractionParams& p,
                                            const LatticeGeometry& geom, double energy, double x_match,
                                            const RadialDomain& dom) {
    const double scale = std::max(1.0, std::abs(energy));
    const double eta = 1e-7 * scale;
    const double w = matching_wronskian(ch, p, geom, energy, x_match, dom);
    const double slope = (matching_wronskian(ch, p, geom, energy + eta, x_match, dom) -
                          matching_wronskian(ch, p, geom, energy - eta, x_match, dom)) /
                         (2.0 * eta);
    if (slope == 0.0) return w == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(w / slope) / scale;
}

/// Eigenvalues of the truncated planar s-wave operator on (0, r_max) below E0,
/// lowest first, with phase evidence from the Kepler trace.
[[nodiscard]] inline WelshReport find_welsh_eigenvalues(const InteractionParams& p, const LatticeGeometry& geom,
                                                        int n_wanted, double r_max) {
    if (n_wanted < 1) throw InvalidArgument("n_wanted must be >= 1");
    if (!(r_max > 2.0 * geom.d)) throw InvalidArgument("r_max must exceed two periods");
    const ChannelSpec& ch = kWelshChannel;
    const RadialDomain dom{0.0, r_max};
    WelshReport rep;
    rep.r_max = r_max;
    rep.e0 = spectrum_bottom(p, geom);
    const double top = rep.e0 - 1e-9 * std::max(1.0, std::abs(rep.e0));
    double w = std::max(1.0, std::abs(rep.e0));
    auto count = [&](double a, double b) { return count_wronskian_zeros(ch, p, geom, a, b, dom, origin_condition(ch)); };
    for (int it = 0; it < 60 && count(rep.e0 - 2.0 * w, rep.e0 - w) > 0; ++it) w *= 2.0;
    rep.window_lo = rep.e0 - w;

    const double x_match = std::max(1.0, std::floor(0.5 * r_max / geom.d)) * geom.d;
    for (double e : channel_eigenvalues_in_window(ch, p, geom, rep.window_lo, top, dom)) {
        const double defect = matching_defect(ch, p, geom, e, x_match, dom);
        if (defect >= kWelshMatchTolerance) continue;
        rep.eigenvalues_found.push_back(e);
        rep.matching_defects.push_back(defect);
        if (static_cast<int>(rep.eigenvalues_found.size()) == n_wanted) break;
    }

    const auto tr = kepler_trace(p, geom, 0.5 * geom.d, r_max, 4);
    rep.phase_drop = tr.phi.back() - tr.phi.front();
    rep.evidence_window = {r_max / 10.0, r_max};
    const auto ev = detail::evaluate_windows(tr, {rep.evidence_window});
    rep.drop_per_decade = ev.drop_per_decade;
    rep.verdict = ev.verdict;

    if (static_cast<int>(rep.eigenvalues_found.size()) < n_wanted) throw FewerThanRequested(rep, n_wanted);
    return rep;
}

[[nodiscard]] inline nlohmann::json to_json(const WelshReport& r) {
    return {{"e0", r.e0},
            {"r_max", r.r_max},
            {"window_lo", r.window_lo},
            {"eigenvalues_found", r.eigenvalues_found},
            {"matching_defects", r.matching_defects},
            {"phase_drop", r.phase_drop},
            {"unbounded_evidence",
             {{"window", {r.evidence_window.first, r.evidence_window.second}},
              {"drop_per_decade", r.drop_per_decade},
              {"verdict", to_string(r.verdict)}}}};
}

}  // namespace shellspec
