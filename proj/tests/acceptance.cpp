// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "shellspec/kronig1d.hpp"
#include "shellspec/oracle.hpp"
#include "shellspec/radial.hpp"
#include "shellspec/spectral_map.hpp"
#include "shellspec/welsh.hpp"

using namespace shellspec;
using std::numbers::pi;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

// Rows with 20 <= k <= 30 of an asymptotics report built from 30 bands.
std::vector<BandAsymptoticsRow> tail_rows(const AsymptoticsReport& rep) {
    std::vector<BandAsymptoticsRow> out;
    for (const auto& r : rep.per_band)
        if (r.k >= 20 && r.k <= 30) out.push_back(r);
    return out;
}

Outcome delta_gap_asymptote() {
    const auto p = delta_interaction(1.0);
    const LatticeGeometry g(pi);
    const auto rep = asymptotics_report(p, g, 30);
    const double target = 2.0 / pi;
    std::vector<double> errs;
    for (const auto& r : tail_rows(rep)) errs.push_back(std::abs(r.gap_width - target) / target);
    const double err = mean(errs);
    std::vector<double> lx, ly;
    for (const auto& r : rep.per_band) {
        if (r.k < 5) continue;
        lx.push_back(std::log(static_cast<double>(r.k)));
        ly.push_back(std::log(std::abs(r.gap_width - target) / target));
    }
    const double slope = ls_slope(lx, ly);
    return {errs.size() >= 10 && err < 0.05 && std::abs(slope + 1.0) <= 0.3,
            "mean relative error " + fmt("%.3e", err) + ", log-log error slope " + fmt("%.3f", slope)};
}

Outcome intermediate_ratio() {
    const auto p = make_interaction(0.0, 0.0, 2.0, 0.5);
    const LatticeGeometry g(1.0);
    const auto rep = asymptotics_report(p, g, 30);
    const double target = std::asin(0.8) / std::acos(0.8);
    std::vector<double> energy, momentum;
    for (const auto& r : tail_rows(rep)) {
        energy.push_back(r.band_width / r.gap_width);
        const auto& gap = rep.bands.gaps[static_cast<std::size_t>(r.k - 1)];
        const auto& band = rep.bands.bands[static_cast<std::size_t>(r.k)];
        momentum.push_back((std::sqrt(band.upper) - std::sqrt(band.lower)) /
                           (std::sqrt(gap.upper) - std::sqrt(gap.lower)));
    }
    const double e_err = std::abs(mean(energy) - target) / target;
    const double m_err = std::abs(mean(momentum) - target) / target;
    return {energy.size() >= 10 && std::min(e_err, m_err) < 0.05,
            "band/gap ratio energy " + fmt("%.4f", mean(energy)) + " momentum " + fmt("%.4f", mean(momentum)) +
                " target " + fmt("%.4f", target) + " (relative errors " + fmt("%.2e", e_err) + ", " +
                fmt("%.2e", m_err) + ")"};
}

Outcome delta_prime_band_asymptote() {
    const auto rep = asymptotics_report(delta_prime_interaction(1.0), LatticeGeometry(1.0), 30);
    std::vector<double> errs;
    for (const auto& r : tail_rows(rep)) errs.push_back(std::abs(r.band_width - 8.0) / 8.0);
    const double err = mean(errs);
    return {errs.size() >= 10 && err < 0.05 && std::abs(rep.fitted_mu - 1.0) <= 0.15,
            "mean relative band-width error " + fmt("%.3e", err) + ", fitted mu " + fmt("%.4f", rep.fitted_mu)};
}

Outcome ground_state_symmetries() {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int wrong = 0;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const bool nonneg = t < 10;
        const double gm = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.3 + 2.0 * u(rng));
        double dl, al, be;
        if (nonneg && t % 5 == 0) {
            be = 0.0;
            dl = 1.0 / gm;
            al = 4.0 * (u(rng) - 0.5);
        } else {
            be = (nonneg ? 1.0 : -1.0) * (0.05 + 1.5 * u(rng));
            dl = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.3 + 2.0 * u(rng));
            al = (gm * dl - 1.0) / be;
        }
        const auto p = make_interaction(al, be, gm, dl);
        const LatticeGeometry g(0.5 + 2.0 * u(rng));
        const auto rep = ground_state_symmetry(p, g);
        const auto expected = be >= 0.0 ? FloquetSymmetry::Periodic : FloquetSymmetry::Antiperiodic;
        if (rep.symmetry != expected || !(rep.residual < 1e-8)) ++wrong;
        worst = std::max(worst, rep.residual);
    }
    return {wrong == 0, std::to_string(20 - wrong) + "/20 match, worst residual " + fmt("%.2e", worst)};
}

struct ProbeSet {
    InteractionParams p = delta_interaction(1.0);
    LatticeGeometry g{pi};
    std::vector<double> bands, gaps;
};

ProbeSet probe_set() {
    ProbeSet s;
    const auto bs = lowest_bands(s.p, s.g, 11);
    for (int k = 0; k < 10; ++k) {
        s.bands.push_back(0.5 * (bs.bands[k].lower + bs.bands[k].upper));
        s.gaps.push_back(0.5 * (bs.gaps[k].lower + bs.gaps[k].upper));
    }
    return s;
}

Outcome transfer_norm_dichotomy() {
    const auto s = probe_set();
    const double x0 = 10.25 * s.g.d;
    double band_max = 0.0, gap_min = 1e300, worst_rel = 0.0;
    for (int l : {0, 5}) {
        const ChannelSpec ch(3, l);
        for (double e : s.bands)
            band_max = std::max(band_max, transfer_norm_profile(ch, s.p, s.g, e, x0, 1000).growth_per_period);
        for (double e : s.gaps) {
            const double rate = transfer_norm_profile(ch, s.p, s.g, e, x0, 1000).growth_per_period;
            const double floq = floquet_exponent(s.p, s.g, e);
            gap_min = std::min(gap_min, rate);
            worst_rel = std::max(worst_rel, std::abs(rate - floq) / floq);
        }
    }
    const double separation = gap_min / std::max(band_max, 1e-300);
    return {band_max < 1e-3 && worst_rel < 0.02 && separation >= 100.0,
            "max band rate " + fmt("%.2e", band_max) + ", worst gap deviation " + fmt("%.2e", worst_rel) +
                ", separation " + fmt("%.3g", separation)};
}

Outcome oracle_equivalence() {
    std::mt19937 rng(606);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int count_mismatch = 0;
    double worst = 0.0;
    int total = 0;
    for (int t = 0; t < 20; ++t) {
        InteractionParams p = free_interaction();
        if (t % 3 == 0) {
            p = delta_interaction(2.0 * u(rng));
        } else {
            // |beta| >= 0.4 keeps the lowest band wider than the grid error of the oracle
            const double x = u(rng);
            const double be = std::copysign(0.4 + 0.6 * std::abs(x), x);
            if (t % 3 == 1) {
                p = delta_prime_interaction(be);
            } else {
                const double gm = 1.0 + 0.5 * u(rng), dl = 1.0 + 0.5 * u(rng);
                p = make_interaction((gm * dl - 1.0) / be, be, gm, dl);
            }
        }
        const LatticeGeometry g(1.0 + 0.5 * u(rng));
        const ChannelSpec ch(2 + t % 2, t % 5);
        const double r_max = truncation_radius(g);
        const Gap gap = nth_gap(p, g, 1);
        const double margin = 1e-9 * std::max(1.0, std::abs(gap.upper));
        const double lo = gap.lower + margin, hi = gap.upper - margin;
        const int wz = count_wronskian_zeros(ch, p, g, lo, hi, RadialDomain{0.0, r_max}, origin_condition(ch));
        const auto fd = oracle_channel_eigenvalues(ch, p, g, r_max, lo, hi, 128);
        if (static_cast<int>(fd.size()) != wz) {
            ++count_mismatch;
            std::printf("  configuration %d: wronskian count %d, oracle count %zu\n", t, wz, fd.size());
            continue;
        }
        const auto ev = channel_eigenvalues_in_window(ch, p, g, lo, hi, RadialDomain{0.0, r_max});
        for (std::size_t i = 0; i < ev.size() && i < fd.size(); ++i) worst = std::max(worst, std::abs(ev[i] - fd[i]));
        total += wz;
    }
    return {count_mismatch == 0 && worst < 1e-3, std::to_string(20 - count_mismatch) + "/20 counts equal (" +
                                                     std::to_string(total) + " eigenvalues), worst position gap " +
                                                     fmt("%.2e", worst)};
}

Outcome welsh_eigenvalues() {
    const LatticeGeometry g(1.0);
    const auto p = delta_interaction(1.0);
    auto found = [&](const InteractionParams& q, double r_max) {
        try {
            return find_welsh_eigenvalues(q, g, 2, r_max);
        } catch (const FewerThanRequested& e) {
            return e.report();
        }
    };
    const auto base = found(p, 1000.5);
    const auto wide = found(p, 2000.5);
    bool stable = base.eigenvalues_found.size() >= 2;
    for (std::size_t i = 0; i < base.eigenvalues_found.size() && i < 2; ++i)
        stable = stable && i < wide.eigenvalues_found.size() &&
                 std::abs(base.eigenvalues_found[i] - wide.eigenvalues_found[i]) < 1e-6;
    const auto free_rep = found(free_interaction(), 1000.5);
    const auto w = decade_windows(1.0, 3);
    const auto v_delta = phase_unbounded_test(p, g, w);
    const auto v_free = phase_unbounded_test(free_interaction(), g, w);
    const bool pass = stable && free_rep.eigenvalues_found.empty() && v_delta.verdict == PhaseVerdict::Unbounded &&
                      v_free.verdict == PhaseVerdict::PlateauSuspected;
    return {pass, std::to_string(base.eigenvalues_found.size()) + " eigenvalues below e0 (free " +
                      std::to_string(free_rep.eigenvalues_found.size()) + "), verdicts " + to_string(v_delta.verdict) +
                      " / " + to_string(v_free.verdict) + ", delta drop " +
                      fmt("%.4f", v_delta.drop_per_decade) + " rad/decade"};
}

Outcome wronskian_continuity() {
    std::mt19937 rng(88);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const double gm = 1.0 + 0.6 * u(rng), dl = 1.0 + 0.6 * u(rng);
        double be = u(rng);
        if (std::abs(be) < 0.05) be = std::copysign(0.05, be);
        const auto p = make_interaction((gm * dl - 1.0) / be, be, gm, dl);
        const LatticeGeometry g(1.0);
        const double e = 30.0 * (0.5 + 0.5 * u(rng));
        const ChannelSpec ch(2 + t % 2, t % 4);
        const Vec2<double> a{u(rng), u(rng)}, b{u(rng), u(rng)};
        const double x0 = 5.25;
        worst = std::max(worst, transport_wronskian(ch, p, g, e, a, b, x0, x0 + 1000.0).relative_drift());
    }
    return {worst < 1e-8, "worst relative drift " + fmt("%.2e", worst)};
}

Outcome m_function_dichotomy() {
    const auto s = probe_set();
    const double r_max = 64.5 * s.g.d;
    bool positive = true, band_ok = true, gap_ok = true;
    double band_min = 1e300, gap_spread = 0.0;
    for (int l : {0, 5}) {
        const ChannelSpec ch(3, l);
        for (double e : s.bands) {
            const auto lad = m_function_ladder(ch, s.p, s.g, e, 1e-1, 10.0, 4, r_max);
            for (const auto& x : lad.ladder) positive = positive && x.im_m > 0.0;
            const double a = lad.ladder[2].im_m, b = lad.ladder[3].im_m;
            band_ok = band_ok && lad.im_m_limit > 0.0 && std::abs(a - b) <= 0.05 * std::abs(b);
            band_min = std::min(band_min, lad.im_m_limit);
        }
        for (double e : s.gaps) {
            const auto lad = m_function_ladder(ch, s.p, s.g, e, 1e-1, 10.0, 4, r_max);
            for (const auto& x : lad.ladder) positive = positive && x.im_m > 0.0;
            std::vector<double> slopes;
            for (const auto& x : lad.ladder) slopes.push_back(x.im_m / x.epsilon);
            const auto [mn, mx] = std::minmax_element(slopes.begin() + 1, slopes.end());
            const double spread = (*mx - *mn) / *mx;
            gap_spread = std::max(gap_spread, spread);
            gap_ok = gap_ok && spread < 0.1;
        }
    }
    return {positive && band_ok && gap_ok, std::string("Herglotz ") + (positive ? "holds" : "violated") +
                                               ", smallest band Im m " + fmt("%.3e", band_min) +
                                               ", worst gap Im m / eps spread " + fmt("%.2e", gap_spread)};
}

Outcome densification() {
    const auto p = delta_interaction(1.0);
    const LatticeGeometry g(pi);
    const Gap gap = nth_gap(p, g, 1);
    const auto eigs = gap_eigenvalues(p, g, 3, 1, {0, 40}, truncation_radius(g));
    std::vector<double> all;
    double prev = gap.upper - gap.lower;
    bool monotone = true;
    for (const auto& [l, list] : eigs) {
        all.insert(all.end(), list.begin(), list.end());
        const double le = largest_empty_subinterval(gap.lower, gap.upper, all);
        monotone = monotone && le <= prev;
        prev = le;
    }
    const double frac = prev / (gap.upper - gap.lower);
    return {monotone && frac < 0.2, std::string(monotone ? "monotone" : "not monotone") + ", final fraction " +
                                        fmt("%.4f", frac) + " of the gap width"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"delta-type gap asymptote", 10, delta_gap_asymptote},
        {"intermediate band/gap ratio", 10, intermediate_ratio},
        {"delta-prime band asymptote", 10, delta_prime_band_asymptote},
        {"ground-state symmetry", 60, ground_state_symmetries},
        {"transfer-norm dichotomy", 60, transfer_norm_dichotomy},
        {"oracle equivalence", 300, oracle_equivalence},
        {"welsh eigenvalues", 120, welsh_eigenvalues},
        {"wronskian continuity", 300, wronskian_continuity},
        {"m-function dichotomy", 120, m_function_dichotomy},
        {"densification", 300, densification},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dt > c.budget_s) {
            o.pass = false;
            o.detail += ", over time budget";
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, o.detail.c_str(),
                    dt);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
