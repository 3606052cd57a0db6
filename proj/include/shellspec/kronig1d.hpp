#pragma once

// One-dimensional generalized Kronig-Penney comparison operator: -f'' with the
// interaction at every x_n = n d + d/2. Monodromy, Floquet discriminant, band
// edges, spectrum bottom, ground-state symmetry and high-energy asymptotics.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "shellspec/errors.hpp"
#include "shellspec/interaction.hpp"
#include "shellspec/linalg.hpp"

namespace shellspec {

/// Exact flow of -f'' = E f over a length L in the (value, derivative) basis.
template <class T>
[[nodiscard]] inline Mat2<T> free_propagator(T energy, double length) {
    if constexpr (is_complex<T>::value) {
        const T k = std::sqrt(energy);
        const T kl = k * length;
        T sinc;  // sin(kL)/k
        if (std::abs(kl) < 1e-4) {
            const T e = energy * length * length;
            sinc = length * (1.0 - e / 6.0 + e * e / 120.0);
        } else {
            sinc = std::sin(kl) / k;
        }
        const T cs = std::cos(kl);
        return {cs, sinc, -energy * sinc, cs};
    } else {
        if (energy > 0.0) {
            const double k = std::sqrt(energy);
            const double s = std::sin(k * length), cs = std::cos(k * length);
            return {cs, s / k, -k * s, cs};
        }
        if (energy < 0.0) {
            const double kappa = std::sqrt(-energy);
            const double s = std::sinh(kappa * length), cs = std::cosh(kappa * length);
            return {cs, s / kappa, kappa * s, cs};
        }
        return {1.0, length, 0.0, 1.0};
    }
}

struct Monodromy {
    Mat2<double> entries;
    double energy = 0.0;
};

/// Transfer over one period starting just right of a site: Lambda * P(E, d).
template <class T = double>
[[nodiscard]] inline Mat2<T> monodromy_matrix(const InteractionParams& p, const LatticeGeometry& geom, T energy) {
    return p.matrix<T>() * free_propagator<T>(energy, geom.d);
}

[[nodiscard]] inline Monodromy monodromy(const InteractionParams& p, const LatticeGeometry& geom, double energy) {
    return {monodromy_matrix<double>(p, geom, energy), energy};
}

/// Floquet discriminant D(E) = tr M(E) / 2.
[[nodiscard]] inline double discriminant(const InteractionParams& p, const LatticeGeometry& geom, double energy) {
    return 0.5 * monodromy_matrix<double>(p, geom, energy).trace();
}

struct Band {
    double lower = 0.0;
    double upper = 0.0;
    bool truncated = false;  ///< upper end is the search window limit, not an edge
};

struct Gap {
    double lower = 0.0;
    double upper = 0.0;
    [[nodiscard]] double width() const { return upper - lower; }
    [[nodiscard]] bool closed() const { return upper == lower; }
};

struct BandStructure {
    std::vector<double> edges;  ///< E_0 <= E_1 <= ..., equal pairs mark closed gaps
    std::vector<Band> bands;
    std::vector<Gap> gaps;  ///< gaps[k] lies between bands[k] and bands[k+1]
    double e0 = 0.0;
    double e_min = 0.0;
    double e_max = 0.0;

    /// Union of the bands with closed gaps merged away.
    [[nodiscard]] std::vector<Band> merged() const {
        std::vector<Band> out;
        for (const auto& b : bands) {
            if (!out.empty() && out.back().upper == b.lower) {
                out.back().upper = b.upper;
                out.back().truncated = b.truncated;
            } else {
                out.push_back(b);
            }
        }
        return out;
    }
};

namespace detail {

inline double bisect_level(const InteractionParams& p, const LatticeGeometry& geom, double level, double lo,
                           double hi) {
    double flo = discriminant(p, geom, lo) - level;
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = discriminant(p, geom, mid) - level;
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct EdgeEvent {
    double energy;
    bool double_root;
};

}  // namespace detail

/// Lower energy bound for the search for E_0.
///
/// Takes the more negative of the coupling-based bound
/// -(max|param| + 1)^2 * 4 / d^2 and one built from the single-shell bound-state
/// roots of beta k^2 + (gamma + delta) k + alpha = 0, then widens until the
/// discriminant is outside [-1, 1] at the floor and at twice the floor.
[[nodiscard]] inline double default_energy_floor(const InteractionParams& p, const LatticeGeometry& geom) {
    const double pmax = std::max({std::abs(p.alpha()), std::abs(p.beta()), std::abs(p.gamma()), std::abs(p.delta())});
    double floor = -(pmax + 1.0) * (pmax + 1.0) * 4.0 / (geom.d * geom.d);
    double kappa = 0.0;
    const double qa = p.beta(), qb = p.gamma() + p.delta(), qc = p.alpha();
    if (qa != 0.0) {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
            const double s = std::sqrt(disc);
            kappa = std::max({kappa, (-qb + s) / (2.0 * qa), (-qb - s) / (2.0 * qa)});
        }
    } else if (qb != 0.0) {
        kappa = std::max(kappa, -qc / qb);
    }
    const double kf = 2.0 * kappa + 2.0 * std::numbers::pi / geom.d;
    floor = std::min(floor, -kf * kf);
    for (int it = 0; it < 60; ++it) {
        if (std::abs(discriminant(p, geom, floor)) > 1.0 && std::abs(discriminant(p, geom, 2.0 * floor)) > 1.0) break;
        floor *= 4.0;
    }
    return floor;
}

/// Locates all band edges in [e_min, e_max] and keeps at most max_bands bands.
///
/// Sampling is uniform in sqrt(|E|) with 400 points per Brillouin period pi/d.
/// Simple roots of D = +-1 are found by sign change and bisected to machine
/// precision. Local extrema of D are refined; an extremum that crosses a level
/// between two samples of equal sign yields a narrow band or gap, one that
/// touches a level within 1e-9 yields a closed gap (kept as a zero-width entry).
[[nodiscard]] inline BandStructure band_structure(const InteractionParams& p, const LatticeGeometry& geom,
                                                  double e_min, double e_max, int max_bands = 1 << 30) {
    if (!(e_min < e_max)) throw InvalidArgument("band_structure requires e_min < e_max");
    constexpr double kTangency = 1e-9;
    const double hk = std::numbers::pi / geom.d / 400.0;

    auto wave = [](double e) { return e >= 0.0 ? std::sqrt(e) : -std::sqrt(-e); };
    auto energy_of = [](double w) { return w >= 0.0 ? w * w : -w * w; };
    const double w_lo = wave(e_min), w_hi = wave(e_max);
    const auto n_samples = static_cast<std::size_t>(std::ceil((w_hi - w_lo) / hk)) + 1;
    std::vector<double> es(n_samples + 1), ds(n_samples + 1);
    for (std::size_t i = 0; i <= n_samples; ++i) {
        const double w = i == n_samples ? w_hi : w_lo + static_cast<double>(i) * (w_hi - w_lo) / n_samples;
        es[i] = i == 0 ? e_min : (i == n_samples ? e_max : energy_of(w));
        ds[i] = discriminant(p, geom, es[i]);
    }

    std::vector<detail::EdgeEvent> events;
    auto crosses = [](double a, double b, double level) { return (a - level) * (b - level) < 0.0; };
    for (std::size_t i = 0; i + 1 < es.size(); ++i) {
        for (double level : {1.0, -1.0}) {
            if (ds[i] == level && i > 0 && (ds[i - 1] - level) * (ds[i + 1] - level) < 0.0)
                events.push_back({es[i], false});
            if (crosses(ds[i], ds[i + 1], level))
                events.push_back({detail::bisect_level(p, geom, level, es[i], es[i + 1]), false});
        }
    }
    for (std::size_t i = 1; i + 1 < es.size(); ++i) {
        const double left = ds[i] - ds[i - 1], right = ds[i + 1] - ds[i];
        if (left * right > 0.0) continue;
        const bool is_max = left > 0.0 || right < 0.0;
        const double sign = is_max ? -1.0 : 1.0;
        auto [xe, fe] = boost::math::tools::brent_find_minima(
            [&](double e) { return sign * discriminant(p, geom, e); }, es[i - 1], es[i + 1], 52);
        const double de = sign * fe;
        for (double level : {1.0, -1.0}) {
            const bool side_cross = crosses(ds[i - 1], ds[i], level) || crosses(ds[i], ds[i + 1], level);
            if (side_cross) continue;
            if (std::abs(de - level) <= kTangency) {
                if ((is_max && level > 0.0) || (!is_max && level < 0.0)) events.push_back({xe, true});
            } else if (crosses(ds[i], de, level)) {
                events.push_back({detail::bisect_level(p, geom, level, es[i - 1], xe), false});
                events.push_back({detail::bisect_level(p, geom, level, xe, es[i + 1]), false});
            }
        }
    }
    std::sort(events.begin(), events.end(), [](auto& a, auto& b) { return a.energy < b.energy; });
    std::vector<detail::EdgeEvent> uniq;
    for (const auto& ev : events) {
        if (!uniq.empty() && std::abs(ev.energy - uniq.back().energy) <= 1e-12 * std::max(1.0, std::abs(ev.energy)) &&
            uniq.back().double_root == ev.double_root) {
            continue;
        }
        uniq.push_back(ev);
    }

    BandStructure bs;
    bs.e_min = e_min;
    bs.e_max = e_max;
    bool in_band = std::abs(ds[0]) <= 1.0;
    double band_start = e_min;
    auto inside_check = [&](double lo, double hi, bool band) {
        if (hi <= lo) return;
        const double mid = 0.5 * (lo + hi);
        const bool got = std::abs(discriminant(p, geom, mid)) <= 1.0;
        if (got != band) {
            throw BracketingFailure("edge sampling could not separate edges in [" + format_double(lo) + ", " +
                                    format_double(hi) + "]");
        }
    };
    double prev = e_min;
    for (const auto& ev : uniq) {
        if (static_cast<int>(bs.bands.size()) >= max_bands) break;
        inside_check(prev, ev.energy, in_band);
        if (ev.double_root) {
            if (in_band) {
                bs.bands.push_back({band_start, ev.energy, false});
                bs.gaps.push_back({ev.energy, ev.energy});
                bs.edges.push_back(ev.energy);
                bs.edges.push_back(ev.energy);
                band_start = ev.energy;
            } else {
                bs.bands.push_back({ev.energy, ev.energy, false});
                bs.edges.push_back(ev.energy);
                bs.edges.push_back(ev.energy);
            }
        } else if (in_band) {
            bs.bands.push_back({band_start, ev.energy, false});
            bs.edges.push_back(ev.energy);
            in_band = false;
        } else {
            band_start = ev.energy;
            bs.edges.push_back(ev.energy);
            in_band = true;
        }
        prev = ev.energy;
    }
    if (in_band && static_cast<int>(bs.bands.size()) < max_bands) {
        inside_check(prev, e_max, true);
        bs.bands.push_back({band_start, e_max, true});
    }
    // Gaps between consecutive bands (closed ones already carry zero width).
    bs.gaps.clear();
    for (std::size_t k = 0; k + 1 < bs.bands.size(); ++k) bs.gaps.push_back({bs.bands[k].upper, bs.bands[k + 1].lower});
    bs.e0 = bs.bands.empty() ? std::numeric_limits<double>::quiet_NaN() : bs.bands.front().lower;
    return bs;
}

/// Bands from the default floor upward until n_bands complete bands are found.
[[nodiscard]] inline BandStructure lowest_bands(const InteractionParams& p, const LatticeGeometry& geom, int n_bands) {
    const double floor = default_energy_floor(p, geom);
    double kmax = (n_bands + 2) * std::numbers::pi / geom.d;
    for (int attempt = 0; attempt < 20; ++attempt) {
        BandStructure bs = band_structure(p, geom, floor, kmax * kmax, n_bands + 1);
        int complete = 0;
        for (const auto& b : bs.bands) complete += b.truncated ? 0 : 1;
        if (complete >= n_bands) {
            bs.bands.resize(n_bands);
            bs.gaps.resize(std::max(0, n_bands - 1));
            bs.edges.resize(std::min<std::size_t>(bs.edges.size(), 2 * static_cast<std::size_t>(n_bands)));
            return bs;
        }
        kmax *= 1.5;
    }
    throw BracketingFailure("could not resolve " + std::to_string(n_bands) + " bands");
}

/// Bottom of the spectrum E_0 = inf sigma(h_Lambda).
[[nodiscard]] inline double spectrum_bottom(const InteractionParams& p, const LatticeGeometry& geom) {
    const double floor = default_energy_floor(p, geom);
    double top = std::pow(std::numbers::pi / geom.d, 2) + 1.0;
    for (int it = 0; it < 40; ++it) {
        const BandStructure bs = band_structure(p, geom, floor, top, 1);
        if (!bs.bands.empty()) return bs.e0;
        top *= 2.0;
    }
    throw BracketingFailure("no band found below " + format_double(top));
}

enum class FloquetSymmetry { Periodic, Antiperiodic };

[[nodiscard]] inline const char* to_string(FloquetSymmetry s) {
    return s == FloquetSymmetry::Periodic ? "Periodic" : "Antiperiodic";
}

struct GroundStateReport {
    double e0 = 0.0;
    FloquetSymmetry symmetry = FloquetSymmetry::Periodic;
    double residual = 0.0;
    Vec2<double> eigenvector;  ///< unit (u, u') just right of a site
};

/// Unit Floquet eigenvector of M for the multiplier `sign` and its residual.
[[nodiscard]] inline std::pair<Vec2<double>, double> floquet_eigenvector(const Mat2<double>& m, double sign) {
    const Mat2<double> a{m.a - sign, m.b, m.c, m.d - sign};
    const double r0 = std::hypot(a.a, a.b), r1 = std::hypot(a.c, a.d);
    Vec2<double> w;
    if (std::max(r0, r1) == 0.0) {
        w = {1.0, 0.0};
    } else if (r0 >= r1) {
        w = {-a.b / r0, a.a / r0};
    } else {
        w = {-a.d / r1, a.c / r1};
    }
    const Vec2<double> res = m * w - sign * w;
    return {w, norm(res)};
}

[[nodiscard]] inline GroundStateReport ground_state_symmetry(const InteractionParams& p, const LatticeGeometry& geom,
                                                             std::optional<double> e0_known = std::nullopt) {
    const double e0 = e0_known ? *e0_known : spectrum_bottom(p, geom);
    const Mat2<double> m = monodromy_matrix<double>(p, geom, e0);
    const double dval = 0.5 * m.trace();
    if (std::abs(std::abs(dval) - 1.0) > 1e-8) {
        throw DegenerateEdge("|D(e0)| - 1 = " + format_double(std::abs(dval) - 1.0));
    }
    const double sign = dval > 0.0 ? 1.0 : -1.0;
    auto [w, residual] = floquet_eigenvector(m, sign);
    return {e0, sign > 0.0 ? FloquetSymmetry::Periodic : FloquetSymmetry::Antiperiodic, residual, w};
}

struct BandAsymptoticsRow {
    int k = 0;              ///< band number counted from the lowest band (0)
    double gap_width = 0;   ///< E_{2k} - E_{2k-1}
    double band_width = 0;  ///< E_{2k+1} - E_{2k}
    double ratio = 0;       ///< gap_width / band_width
};

struct AsymptoticsReport {
    InteractionClass cls{};
    bool single_band = false;  ///< every gap closed; mu undefined
    double measured_constant = std::numeric_limits<double>::quiet_NaN();
    double fitted_mu = std::numeric_limits<double>::quiet_NaN();
    std::vector<BandAsymptoticsRow> per_band;
    BandStructure bands;
};

/// Least-squares slope of y against x.
[[nodiscard]] inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

/// Per-band gap/band widths over bands 1..n_bands, log-log fit of the gap/band
/// ratio for mu over bands k >= ceil(n/3), and the tail mean (bands
/// k >= ceil(2n/3)) of the quantity the class predicts: gap width, band/gap
/// ratio, or band width.
[[nodiscard]] inline AsymptoticsReport asymptotics_report(const InteractionParams& p, const LatticeGeometry& geom,
                                                          int n_bands) {
    if (n_bands < 10) throw InvalidArgument("asymptotics_report needs n_bands >= 10");
    AsymptoticsReport rep;
    rep.cls = classify(p, geom);
    rep.bands = lowest_bands(p, geom, n_bands + 1);
    const auto& bands = rep.bands.bands;
    bool any_open = false;
    for (const auto& g : rep.bands.gaps) any_open = any_open || !g.closed();
    if (!any_open) {
        rep.single_band = true;
        return rep;
    }
    for (int k = 1; k <= n_bands; ++k) {
        const auto& b = bands[static_cast<std::size_t>(k)];
        BandAsymptoticsRow row;
        row.k = k;
        row.gap_width = b.lower - bands[static_cast<std::size_t>(k - 1)].upper;
        row.band_width = b.upper - b.lower;
        row.ratio = row.gap_width / row.band_width;
        rep.per_band.push_back(row);
    }
    std::vector<double> lx, ly;
    const int fit_start = (n_bands + 2) / 3;
    for (const auto& r : rep.per_band) {
        if (r.ratio > 0.0 && r.k >= fit_start) {
            lx.push_back(std::log(static_cast<double>(r.k)));
            ly.push_back(std::log(r.ratio));
        }
    }
    if (lx.size() >= 2) rep.fitted_mu = ls_slope(lx, ly);
    const int tail_start = (2 * n_bands + 2) / 3;
    double acc = 0.0;
    int cnt = 0;
    for (const auto& r : rep.per_band) {
        if (r.k < tail_start) continue;
        switch (rep.cls.tag) {
            case InteractionKind::DeltaType: acc += r.gap_width; break;
            case InteractionKind::IntermediateType: acc += r.band_width / r.gap_width; break;
            case InteractionKind::DeltaPrimeType: acc += r.band_width; break;
        }
        ++cnt;
    }
    rep.measured_constant = acc / cnt;
    return rep;
}

}  // namespace shellspec
