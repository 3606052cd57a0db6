#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "shellspec/oracle.hpp"
#include "shellspec/welsh.hpp"

using namespace shellspec;

namespace {

double max_increase(const KeplerTrace& tr) {
    double m = 0.0;
    for (std::size_t i = 1; i < tr.phi.size(); ++i) m = std::max(m, tr.phi[i] - tr.phi[i - 1]);
    return m;
}

double sup_gap(const KeplerTrace& tr) {
    double m = 0.0;
    for (std::size_t i = 0; i < tr.phi.size(); ++i) m = std::max(m, std::abs(tr.gamma_phase[i] - tr.phi[i]));
    return m;
}

}  // namespace

TEST(FloquetBasis, FreeIsConstantAndLinear) {
    const auto b = floquet_basis_at_e0(free_interaction(), LatticeGeometry(1.0));
    for (double r : {0.1, 0.5, 0.9, 3.7, 12.25}) {
        EXPECT_NEAR(b.u(r).value, 1.0, 1e-12);
        EXPECT_NEAR(b.u(r).derivative, 0.0, 1e-12);
        EXPECT_NEAR(b.v(r).value, r, 1e-10);
        EXPECT_NEAR(b.v(r).derivative, 1.0, 1e-12);
    }
}

TEST(FloquetBasis, DeltaWronskianAndPeriodicity) {
    const auto b = floquet_basis_at_e0(delta_interaction(1.0), LatticeGeometry(1.0));
    EXPECT_EQ(b.symmetry, FloquetSymmetry::Periodic);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> pos(0.01, 50.0);
    for (int i = 0; i < 100; ++i) {
        const double r = pos(rng);
        const auto [u, v] = b.eval(r);
        EXPECT_NEAR(wronskian(u, v), 1.0, 1e-8);
        EXPECT_NEAR(b.u(r + 1.0).value, u.value, 1e-8);
        // u solves -u'' = E0 u between shells
        const double h = 1e-4;
        if (std::abs(std::fmod(r, 1.0) - 0.5) > 2 * h) {
            const double second = (b.u(r + h).value - 2 * u.value + b.u(r - h).value) / (h * h);
            EXPECT_NEAR(-second, b.e0 * u.value, 1e-5);
        }
    }
}

TEST(FloquetBasis, NegativeDeltaPrimeIsAntiperiodic) {
    const auto b = floquet_basis_at_e0(delta_prime_interaction(-1.0), LatticeGeometry(1.0));
    EXPECT_EQ(b.symmetry, FloquetSymmetry::Antiperiodic);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> pos(0.01, 50.0);
    for (int i = 0; i < 100; ++i) {
        const double r = pos(rng);
        EXPECT_NEAR(b.u(r + 1.0).value, -b.u(r).value, 1e-8);
        EXPECT_NEAR(wronskian(b.u(r), b.v(r)), 1.0, 1e-8);
    }
}

TEST(FloquetBasis, ShellJumpFollowsInterface) {
    const auto p = make_interaction(0.2, -0.5, 1.5, 0.6);
    const auto b = floquet_basis_at_e0(p, LatticeGeometry(1.0));
    const Vec2<double> left = b.u(2.5, -1), right = b.u(2.5, 1);
    const Vec2<double> expect = apply_interaction(p, left);
    EXPECT_NEAR(right.value, expect.value, 1e-12);
    EXPECT_NEAR(right.derivative, expect.derivative, 1e-12);
}

TEST(KeplerTrace, FreePlateau) {
    const auto tr = kepler_trace(free_interaction(), LatticeGeometry(1.0), 0.5, 1000.0);
    EXPECT_EQ(tr.jump_sum, 0.0);
    EXPECT_LE(max_increase(tr), 1e-9);
    // no decrease left after the first decade
    const double at10 = detail::phi_at(tr, 10.0);
    EXPECT_LT(at10 - tr.phi.back(), 1e-6);
    EXPECT_LT(sup_gap(tr), std::numbers::pi);
}

TEST(KeplerTrace, DeltaMonotoneNoJumps) {
    const auto tr = kepler_trace(delta_interaction(1.0), LatticeGeometry(1.0), 0.5, 1000.0);
    EXPECT_EQ(tr.jump_sum, 0.0);
    for (double j : tr.jumps) EXPECT_EQ(j, 0.0);
    EXPECT_LE(max_increase(tr), 1e-9);
    EXPECT_LT(tr.phi.back(), tr.phi.front());
}

TEST(KeplerTrace, PhaseDifferenceStaysBounded) {
    const auto p = delta_interaction(-1.0);
    const LatticeGeometry g(1.0);
    const double short_gap = sup_gap(kepler_trace(p, g, 0.5, 100.0));
    const double long_gap = sup_gap(kepler_trace(p, g, 0.5, 5000.0));
    EXPECT_LT(long_gap, std::numbers::pi);
    EXPECT_LT(long_gap - short_gap, 0.2);
}

TEST(KeplerTrace, RepulsiveDeltaPrimeJumpsAreNegative) {
    const auto tr = kepler_trace(delta_prime_interaction(0.5), LatticeGeometry(1.0), 0.5, 200.0);
    // the start radius is itself a shell and is taken as a right limit
    int shells = 0;
    for (std::size_t i = 1; i < tr.radii.size(); ++i) {
        if (std::abs(std::fmod(tr.radii[i], 1.0) - 0.5) < 1e-12) {
            ++shells;
            EXPECT_LT(tr.jumps[i], 0.0) << "r = " << tr.radii[i];
        }
    }
    EXPECT_EQ(shells, 199);
    EXPECT_GT(tr.jump_sum, 0.0);
    EXPECT_LE(max_increase(tr), 1e-9);
}

TEST(KeplerTrace, DecayRateMatchesAveragedBottleneck) {
    // Averaging phi' over a period gives -(a + b sin(2 phi + psi)) / (2r) with
    // a = <1/u^2> + <u^2>/4, b^2 = 1 + (<1/u^2> - <u^2>/4)^2. Near the slow
    // point phi drops by ln(10) (a - b) / 2 per decade.
    const auto p = delta_interaction(3.0);
    const LatticeGeometry g(1.0);
    const auto b = floquet_basis_at_e0(p, g);
    const int n = 4000;
    double m2 = 0.0, mi = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = b.u((i + 0.5) / n).value;
        m2 += u * u / n;
        mi += 1.0 / (u * u) / n;
    }
    const double a = mi + 0.25 * m2, bb = std::hypot(1.0, mi - 0.25 * m2);
    const double predicted = std::log(10.0) * (a - bb) / 2.0;
    const auto tr = kepler_trace(p, g, 0.5, 1e4);
    const double measured = (detail::phi_at(tr, 1e3) - detail::phi_at(tr, 1e4));
    EXPECT_NEAR(measured, predicted, 0.1 * predicted);
}

TEST(PhaseTest, Verdicts) {
    const LatticeGeometry g(1.0);
    const auto w = decade_windows(1.0, 3);
    EXPECT_EQ(phase_unbounded_test(free_interaction(), g, w).verdict, PhaseVerdict::PlateauSuspected);
    const auto dp = phase_unbounded_test(delta_prime_interaction(0.5), g, w);
    EXPECT_EQ(dp.verdict, PhaseVerdict::Unbounded);
    EXPECT_EQ(dp.windows.size(), 3u);
    EXPECT_THROW((void)phase_unbounded_test(free_interaction(), g, decade_windows(1.0, 2)), InvalidArgument);
}

TEST(Welsh, FreeHasNone) {
    try {
        (void)find_welsh_eigenvalues(free_interaction(), LatticeGeometry(1.0), 1, 200.5);
        FAIL() << "expected FewerThanRequested";
    } catch (const FewerThanRequested& e) {
        EXPECT_TRUE(e.report().eigenvalues_found.empty());
        EXPECT_EQ(e.report().r_max, 200.5);
        EXPECT_EQ(e.category(), ErrorCategory::Numerical);
    }
}

TEST(Welsh, DeltaPrimeBoundStateMatchesOracle) {
    const auto p = delta_prime_interaction(0.5);
    const LatticeGeometry g(1.0);
    for (double r_max : {100.5, 1000.5}) {
        const auto rep = find_welsh_eigenvalues(p, g, 1, r_max);
        ASSERT_EQ(rep.eigenvalues_found.size(), 1u);
        EXPECT_LT(rep.eigenvalues_found[0], rep.e0);
        EXPECT_LT(rep.matching_defects[0], kWelshMatchTolerance);
        const auto op = discretize_channel(kWelshChannel, p, g, r_max);
        const double top = rep.e0 - 1e-9 * std::max(1.0, std::abs(rep.e0));
        EXPECT_EQ(count_below(op, top) - count_below(op, rep.window_lo), 1);
        const auto fd = oracle_channel_eigenvalues(kWelshChannel, p, g, r_max, rep.window_lo, top);
        ASSERT_EQ(fd.size(), 1u);
        EXPECT_NEAR(fd[0], rep.eigenvalues_found[0], 1e-6);
    }
    // enlarging the domain can only lower the state
    const double e100 = find_welsh_eigenvalues(p, g, 1, 100.5).eigenvalues_found[0];
    const double e1000 = find_welsh_eigenvalues(p, g, 1, 1000.5).eigenvalues_found[0];
    EXPECT_LT(e1000, e100);
}

TEST(Welsh, CountMonotoneInTruncation) {
    const auto p = make_interaction(0.2, -0.5, 1.5, 0.6);
    const LatticeGeometry g(1.0);
    std::size_t last = 0;
    for (double r_max : {50.5, 200.5, 800.5}) {
        WelshReport rep;
        try {
            rep = find_welsh_eigenvalues(p, g, 10, r_max);
        } catch (const FewerThanRequested& e) {
            rep = e.report();
        }
        for (double e : rep.eigenvalues_found) EXPECT_LT(e, rep.e0);
        EXPECT_TRUE(std::is_sorted(rep.eigenvalues_found.begin(), rep.eigenvalues_found.end()));
        EXPECT_GE(rep.eigenvalues_found.size(), last);
        last = rep.eigenvalues_found.size();
    }
    EXPECT_GE(last, 1u);
}

TEST(Welsh, ReportSerialization) {
    WelshReport r;
    r.e0 = -1.5;
    r.eigenvalues_found = {-2.0, -1.75};
    r.matching_defects = {1e-9, 2e-9};
    r.evidence_window = {100.0, 1000.0};
    const auto j = to_json(r);
    EXPECT_EQ(j["eigenvalues_found"].size(), 2u);
    EXPECT_EQ(j["unbounded_evidence"]["verdict"], "PlateauSuspected");
    KeplerTrace tr;
    tr.radii = {1.0, 2.0};
    tr.phi = {0.5, 0.25};
    tr.gamma_phase = {0.4, 0.3};
    tr.jumps = {0.0, -0.1};
    EXPECT_EQ(to_csv(tr), "r,phi,gamma,jumps\n1,0.5,0.40000000000000002,0\n2,0.25,0.29999999999999999,-0.10000000000000001\n");
}
