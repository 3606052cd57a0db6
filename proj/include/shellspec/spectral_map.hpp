#pragma once

// Full-operator spectral picture: essential spectrum bottom, band/gap
// classification, transfer-norm growth, per-channel gap eigenvalues and a
// complex-energy m-function estimator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shellspec/errors.hpp"
#include "shellspec/interaction.hpp"
#include "shellspec/kronig1d.hpp"
#include "shellspec/parallel.hpp"
#include "shellspec/radial.hpp"

namespace shellspec {

struct EssentialSpectrum {
    double e0 = 0.0;
    std::string statement;
};

[[nodiscard]] inline EssentialSpectrum essential_spectrum(const InteractionParams& p, const LatticeGeometry& geom) {
    const double e0 = spectrum_bottom(p, geom);
    return {e0, "sigma_ess = [" + format_double(e0) + ", inf)"};
}

// ---------------------------------------------------------------------------
// Transfer-norm growth

struct TransferNormProfile {
    double energy = 0.0;
    std::vector<double> radii;      ///< x0 + j d, j = 0..n_periods
    std::vector<double> log_norms;  ///< log ||T(E, x, x0)||
    double sup_norm = 1.0;          ///< may be inf when the log exceeds the double range
    double log_sup_norm = 0.0;
    double growth_rate = 0.0;        ///< fitted slope of log ||T|| per unit length
    double growth_per_period = 0.0;  ///< growth_rate * d
};

[[nodiscard]] inline TransferNormProfile transfer_norm_profile(const ChannelSpec& ch, const InteractionParams& p,
                                                               const LatticeGeometry& geom, double energy, double x0,
                                                               int n_periods, const ode::Tolerance& tol = {}) {
    if (!(x0 > 0.0)) throw InvalidArgument("transfer_norm_profile requires x0 > 0");
    if (n_periods < 1) throw InvalidArgument("n_periods must be >= 1");
    TransferNormProfile out;
    out.energy = energy;
    // F = [a b] * exp(log_scale) * r with [a b] orthonormal
    Vec2<double> a{1.0, 0.0}, b{0.0, 1.0};
    Mat2<double> r = Mat2<double>::identity();
    double log_scale = 0.0;
    const Mat2<double> lam = p.matrix();
    double ha = 0.0, hb = 0.0;
    double pos = x0;
    auto record = [&] {
        out.radii.push_back(pos);
        const double ln = log_scale + std::log(spectral_norm(r));
        out.log_norms.push_back(ln);
        out.log_sup_norm = std::max(out.log_sup_norm, ln);
    };
    record();
    for (int j = 1; j <= n_periods; ++j) {
        const double target = x0 + j * geom.d;
        for (long n = geom.first_site_after(pos); geom.site(n) <= target; ++n) {
            const double s = geom.site(n);
            a = lam * detail::flow<double>(ch.c, energy, pos, s, a, tol, &ha);
            b = lam * detail::flow<double>(ch.c, energy, pos, s, b, tol, &hb);
            pos = s;
        }
        a = detail::flow<double>(ch.c, energy, pos, target, a, tol, &ha);
        b = detail::flow<double>(ch.c, energy, pos, target, b, tol, &hb);
        pos = target;
        // Gram-Schmidt: [a b] = Q R'
        const double r11 = norm(a);
        a = (1.0 / r11) * a;
        const double r12 = a.value * b.value + a.derivative * b.derivative;
        b = b - r12 * a;
        const double r22 = norm(b);
        b = (1.0 / r22) * b;
        r = Mat2<double>{r11, r12, 0.0, r22} * r;
        const double big = std::max({std::abs(r.a), std::abs(r.b), std::abs(r.c), std::abs(r.d)});
        r = (1.0 / big) * r;
        log_scale += std::log(big);
        record();
    }
    out.sup_norm = std::exp(out.log_sup_norm);
    out.growth_rate = ls_slope(out.radii, out.log_norms);
    out.growth_per_period = out.growth_rate * geom.d;
    return out;
}

/// log |mu| of the larger Floquet multiplier of the 1D monodromy (0 in bands).
[[nodiscard]] inline double floquet_exponent(const InteractionParams& p, const LatticeGeometry& geom, double energy) {
    const double dval = discriminant(p, geom, energy);
    if (std::abs(dval) <= 1.0) return 0.0;
    return std::acosh(std::abs(dval));
}

// ---------------------------------------------------------------------------
// Gap eigenvalues

/// Eigenvalues of the truncated channel operator in (lo, hi) isolated by
/// bisection on the Wronskian-zero count down to width `tol`.
[[nodiscard]] inline std::vector<double> channel_eigenvalues_in_window(const ChannelSpec& ch,
                                                                       const InteractionParams& p,
                                                                       const LatticeGeometry& geom, double lo,
                                                                       double hi, const RadialDomain& dom,
                                                                       double tol = 1e-10) {
    if (!(lo < hi)) throw InvalidArgument("empty eigenvalue window");
    const OriginCondition bc = origin_condition(ch);
    std::vector<double> out;
    auto count = [&](double e1, double e2) { return count_wronskian_zeros(ch, p, geom, e1, e2, dom, bc); };
    auto rec = [&](auto&& self, double a, double b, int n) -> void {
        if (n <= 0) return;
        if (b - a <= tol * std::max(1.0, std::abs(a))) {
            for (int i = 0; i < n; ++i) out.push_back(0.5 * (a + b));
            return;
        }
        const double mid = 0.5 * (a + b);
        const int left = count(a, mid);
        self(self, a, mid, left);
        self(self, mid, b, n - left);
    };
    rec(rec, lo, hi, count(lo, hi));
    return out;
}

/// Eigenvalues at r_max that reappear within `shift_tol` when the number of
/// cells is doubled (r_max -> 2 r_max - d/2, i.e. (N + 1/2) d -> (2N + 1/2) d).
/// Discretized band states and wall-bound states move; eigenvalues of the
/// untruncated operator do not.
[[nodiscard]] inline std::vector<double> stable_channel_eigenvalues(const ChannelSpec& ch, const InteractionParams& p,
                                                                    const LatticeGeometry& geom, double lo, double hi,
                                                                    double r_max, double shift_tol = 1e-6) {
    const auto base = channel_eigenvalues_in_window(ch, p, geom, lo, hi, RadialDomain{0.0, r_max});
    const auto wide = channel_eigenvalues_in_window(ch, p, geom, lo, hi, RadialDomain{0.0, 2.0 * r_max - 0.5 * geom.d});
    std::vector<double> out;
    for (double e : base) {
        const bool kept =
            std::any_of(wide.begin(), wide.end(), [&](double w) { return std::abs(w - e) < shift_tol; });
        if (kept) out.push_back(e);
    }
    return out;
}

/// Gap number k >= 1 lies between band k and band k+1 (counted from 1).
[[nodiscard]] inline Gap nth_gap(const InteractionParams& p, const LatticeGeometry& geom, int gap_index) {
    if (gap_index < 1) throw InvalidArgument("gap_index counts from 1");
    const auto bs = lowest_bands(p, geom, gap_index + 1);
    const Gap g = bs.gaps[static_cast<std::size_t>(gap_index - 1)];
    if (g.closed()) throw InvalidArgument("gap " + std::to_string(gap_index) + " is closed");
    return g;
}

[[nodiscard]] inline std::map<int, std::vector<double>> gap_eigenvalues(const InteractionParams& p,
                                                                       const LatticeGeometry& geom, int nu,
                                                                       int gap_index, std::pair<int, int> l_range,
                                                                       double r_max, int jobs = 1) {
    if (l_range.first < 0 || l_range.second < l_range.first) throw InvalidArgument("invalid l range");
    const Gap g = nth_gap(p, geom, gap_index);
    const double margin = 1e-9 * std::max(1.0, std::abs(g.upper));
    const RadialDomain dom{0.0, r_max};
    const auto n = static_cast<std::size_t>(l_range.second - l_range.first + 1);
    std::vector<std::vector<double>> found(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        const ChannelSpec ch(nu, l_range.first + static_cast<int>(i));
        found[i] = channel_eigenvalues_in_window(ch, p, geom, g.lower + margin, g.upper - margin, dom);
    });
    std::map<int, std::vector<double>> out;
    for (std::size_t i = 0; i < n; ++i) out[l_range.first + static_cast<int>(i)] = std::move(found[i]);
    return out;
}

/// Largest eigenvalue-free subinterval of [lo, hi] given the eigenvalues.
[[nodiscard]] inline double largest_empty_subinterval(double lo, double hi, std::vector<double> eigs) {
    std::sort(eigs.begin(), eigs.end());
    double prev = lo, best = 0.0;
    for (double e : eigs) {
        if (e <= lo || e >= hi) continue;
        best = std::max(best, e - prev);
        prev = e;
    }
    return std::max(best, hi - prev);
}

// ---------------------------------------------------------------------------
// m-function

struct MFunctionEstimate {
    double energy = 0.0;
    double epsilon = 0.0;
    std::complex<double> m;
    double im_m = 0.0;
    double abs_m = 0.0;
};

/// Left anchor of the truncated half-line: the origin for c = 0; otherwise
/// the first quarter-cell point (k + 1/4) d beyond the centrifugal turning
/// region, where c / x^2 <= max(|E|, 0.1) / 4.
[[nodiscard]] inline double m_function_anchor(const ChannelSpec& ch, const LatticeGeometry& geom, double energy) {
    if (ch.c == 0.0) return 0.0;
    const double turning = std::sqrt(std::abs(ch.c) / (0.25 * std::max(std::abs(energy), 0.1)));
    return (std::ceil(turning / geom.d) + 0.25) * geom.d;
}

/// m = u+'(x0)/u+(x0) at E + i eps. u+ starts at the last site not beyond
/// r_max on the contracting Floquet direction of the complex monodromy and is
/// propagated back to the anchor.
[[nodiscard]] inline MFunctionEstimate m_function_estimate(const ChannelSpec& ch, const InteractionParams& p,
                                                           const LatticeGeometry& geom, double energy, double epsilon,
                                                           double r_max, const ode::Tolerance& tol = {}) {
    using C = std::complex<double>;
    if (!(epsilon > 0.0)) throw InvalidArgument("m_function_estimate requires epsilon > 0");
    const double x0 = m_function_anchor(ch, geom, energy);
    const long n_last = geom.first_site_after(r_max) - 1;
    if (n_last < 0 || !(geom.site(n_last) > x0)) throw InvalidArgument("r_max must lie beyond the first site");
    const C z(energy, epsilon);
    const Mat2<C> m = monodromy_matrix<C>(p, geom, z);
    const C tr = m.trace();
    const C root = std::sqrt(tr * tr - 4.0);
    C mu = 0.5 * (tr - root);
    if (std::abs(mu) > 1.0) mu = 0.5 * (tr + root);
    if (!(std::abs(mu) < 1.0 - 1e-14)) throw NonDecayingStart("no contracting Floquet direction at E = " +
                                                               format_double(energy));
    const Vec2<C> v1{m.b, mu - m.a}, v2{mu - m.d, m.c};
    const Vec2<C> v = norm(v1) >= norm(v2) ? v1 : v2;
    if (!(norm(v) > 0.0)) throw NonDecayingStart("degenerate Floquet eigenvector");
    // v is a right limit at the site; undo the interaction to get the left limit
    auto s = make_scaled<C>(p.matrix<C>().unimodular_inverse() * v, geom.site(n_last));
    s = propagate<C>(ch, p, geom, z, s, x0, tol);
    if (std::abs(s.unit.value) == 0.0) throw NonDecayingStart("u+ vanishes at the anchor");
    const C mval = s.unit.derivative / s.unit.value;
    return {energy, epsilon, mval, mval.imag(), std::abs(mval)};
}

struct MFunctionLadder {
    std::vector<MFunctionEstimate> ladder;  ///< decreasing epsilon
    double im_m_limit = 0.0;                ///< Richardson extrapolation to eps = 0
};

/// Geometric epsilon ladder eps_max, eps_max/q, ... (n_levels values) with a
/// linear Richardson step on the last two levels.
[[nodiscard]] inline MFunctionLadder m_function_ladder(const ChannelSpec& ch, const InteractionParams& p,
                                                       const LatticeGeometry& geom, double energy, double eps_max,
                                                       double q, int n_levels, double r_max) {
    if (n_levels < 2 || !(q > 1.0)) throw InvalidArgument("ladder needs >= 2 levels and ratio > 1");
    MFunctionLadder out;
    double eps = eps_max;
    for (int i = 0; i < n_levels; ++i, eps /= q) out.ladder.push_back(m_function_estimate(ch, p, geom, energy, eps, r_max));
    const double f_small = out.ladder[n_levels - 1].im_m, f_big = out.ladder[n_levels - 2].im_m;
    out.im_m_limit = (q * f_small - f_big) / (q - 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Spectrum map

enum class SpectralKind { AbsolutelyContinuous, DensePointCandidate };

[[nodiscard]] inline const char* to_string(SpectralKind k) {
    return k == SpectralKind::AbsolutelyContinuous ? "AbsolutelyContinuous" : "DensePointCandidate";
}

struct SpectralInterval {
    double lo = 0.0;
    double hi = 0.0;
    SpectralKind kind = SpectralKind::AbsolutelyContinuous;
};

struct IntervalDiagnostics {
    double probe_energy = 0.0;
    double growth_per_period = 0.0;  ///< transfer-norm growth at the probe
    double floquet_exponent = 0.0;   ///< 1D log|mu| at the probe
    int eigenvalue_count = 0;        ///< over all channels (gaps only)
    double largest_empty = 0.0;      ///< largest eigenvalue-free subinterval (gaps only)
};

struct SpectrumMap {
    double e0 = 0.0;
    double e_cutoff = 0.0;
    int nu = 3;
    std::vector<SpectralInterval> intervals;
    std::map<int, std::vector<double>> channel_eigenvalues;
    std::vector<IntervalDiagnostics> diagnostics;  ///< parallel to intervals
};

struct SpectrumMapOptions {
    int probe_periods = 200;
    int jobs = 1;
};

[[nodiscard]] inline SpectrumMap build_spectrum_map(const InteractionParams& p, const LatticeGeometry& geom, int nu,
                                                    double e_cutoff, std::pair<int, int> l_range, double r_max,
                                                    const SpectrumMapOptions& opt = {}) {
    if (l_range.first < 0 || l_range.second < l_range.first) throw InvalidArgument("invalid l range");
    SpectrumMap map;
    map.nu = nu;
    map.e_cutoff = e_cutoff;
    map.e0 = spectrum_bottom(p, geom);
    if (!(e_cutoff > map.e0)) throw InvalidArgument("e_cutoff must exceed the spectrum bottom");
    const auto bs = band_structure(p, geom, default_energy_floor(p, geom), e_cutoff);
    const auto bands = bs.merged();
    for (std::size_t k = 0; k < bands.size(); ++k) {
        if (k > 0) map.intervals.push_back({bands[k - 1].upper, bands[k].lower, SpectralKind::DensePointCandidate});
        map.intervals.push_back({bands[k].lower, bands[k].upper, SpectralKind::AbsolutelyContinuous});
    }
    if (!bands.empty() && bands.back().upper < e_cutoff)
        map.intervals.push_back({bands.back().upper, e_cutoff, SpectralKind::DensePointCandidate});

    const ChannelSpec probe_channel(nu, l_range.first);
    const double x0 = 10.0 * geom.d + 0.25 * geom.d;
    const auto n_l = static_cast<std::size_t>(l_range.second - l_range.first + 1);
    map.diagnostics.resize(map.intervals.size());
    const RadialDomain dom{0.0, r_max};
    for (std::size_t i = 0; i < map.intervals.size(); ++i) {
        const auto& iv = map.intervals[i];
        auto& dg = map.diagnostics[i];
        dg.probe_energy = 0.5 * (iv.lo + iv.hi);
        dg.growth_per_period =
            transfer_norm_profile(probe_channel, p, geom, dg.probe_energy, x0, opt.probe_periods).growth_per_period;
        dg.floquet_exponent = floquet_exponent(p, geom, dg.probe_energy);
        if (iv.kind != SpectralKind::DensePointCandidate) continue;
        const double margin = 1e-9 * std::max(1.0, std::abs(iv.hi));
        std::vector<std::vector<double>> found(n_l);
        parallel_for(n_l, opt.jobs, [&](std::size_t j) {
            const ChannelSpec ch(nu, l_range.first + static_cast<int>(j));
            found[j] = channel_eigenvalues_in_window(ch, p, geom, iv.lo + margin, iv.hi - margin, dom);
        });
        std::vector<double> all;
        for (std::size_t j = 0; j < n_l; ++j) {
            auto& dst = map.channel_eigenvalues[l_range.first + static_cast<int>(j)];
            dst.insert(dst.end(), found[j].begin(), found[j].end());
            all.insert(all.end(), found[j].begin(), found[j].end());
        }
        dg.eigenvalue_count = static_cast<int>(all.size());
        dg.largest_empty = largest_empty_subinterval(iv.lo, iv.hi, all);
    }
    for (auto& [l, eigs] : map.channel_eigenvalues) std::sort(eigs.begin(), eigs.end());
    return map;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json to_json(const SpectrumMap& map) {
    nlohmann::json j;
    j["e0"] = map.e0;
    j["e_cutoff"] = map.e_cutoff;
    j["nu"] = map.nu;
    j["intervals"] = nlohmann::json::array();
    for (const auto& iv : map.intervals) j["intervals"].push_back({{"lo", iv.lo}, {"hi", iv.hi}, {"kind", to_string(iv.kind)}});
    j["channels"] = nlohmann::json::object();
    for (const auto& [l, eigs] : map.channel_eigenvalues) j["channels"][std::to_string(l)] = eigs;
    j["diagnostics"] = nlohmann::json::array();
    for (const auto& d : map.diagnostics) {
        j["diagnostics"].push_back({{"probe_energy", d.probe_energy},
                                    {"growth_per_period", d.growth_per_period},
                                    {"floquet_exponent", d.floquet_exponent},
                                    {"eigenvalue_count", d.eigenvalue_count},
                                    {"largest_empty", d.largest_empty}});
    }
    return j;
}

/// Flat CSV: one row per interval (record=interval) and one per channel
/// eigenvalue (record=eigenvalue).
[[nodiscard]] inline std::string to_csv(const SpectrumMap& map) {
    std::ostringstream os;
    os << "record,l,lo,hi,kind,value\n";
    for (const auto& iv : map.intervals)
        os << "interval,," << format_double(iv.lo) << ',' << format_double(iv.hi) << ',' << to_string(iv.kind)
           << ",\n";
    for (const auto& [l, eigs] : map.channel_eigenvalues)
        for (double e : eigs) os << "eigenvalue," << l << ",,,," << format_double(e) << '\n';
    return os.str();
}

}  // namespace shellspec
