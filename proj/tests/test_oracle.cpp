#include <cmath>
#include <numbers>
#include <optional>
#include <random>

#include <gtest/gtest.h>

#include "shellspec/oracle.hpp"
#include "shellspec/spectral_map.hpp"

using namespace shellspec;
using std::numbers::pi;

namespace {

DiscretizedOperator free_box(double length, int nodes) {
    const double h = length / nodes;
    return discretize(std::nullopt, free_interaction(), LatticeGeometry(2.0 * h), h, OracleDomain{0.0, length, false});
}

}  // namespace

TEST(Oracle, FreeBoxSecondOrder) {
    const double exact = pi * pi;
    const double e1 = lowest_eigenvalues(free_box(1.0, 100), 1)[0];
    const double e2 = lowest_eigenvalues(free_box(1.0, 200), 1)[0];
    const double ratio = (exact - e1) / (exact - e2);
    EXPECT_NEAR(ratio, 4.0, 0.05);
    EXPECT_GE(std::abs(exact - e2) / std::abs(exact - richardson(e1, e2)), 3.5);
    EXPECT_NEAR(lowest_eigenvalues(free_box(1.0, 1000), 1)[0], exact, 1e-3 * exact);
}

TEST(Oracle, FreeBoxHigherModes) {
    const auto ev = lowest_eigenvalues(free_box(2.0, 400), 4);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(ev[k], std::pow((k + 1) * pi / 2.0, 2), 2e-3 * ev[k]);
}

TEST(Oracle, DeltaIsLocalCorrection) {
    const double alpha = 1.7, d = 1.0, h = d / 8;
    const LatticeGeometry g(d);
    const OracleDomain dom{0.0, 4.0, false};
    const auto a = discretize(std::nullopt, delta_interaction(alpha), g, h, dom);
    const auto f = discretize(std::nullopt, free_interaction(), g, h, dom);
    const double corr = alpha / (h * (4.0 + alpha * h));
    for (std::size_t j = 0; j + 1 < a.size(); ++j) {
        const double face = (static_cast<double>(j) + 1.0) * h;
        const bool shell = std::abs(std::fmod(face - 0.5 * d, d)) < 1e-12;
        EXPECT_NEAR(a.upper[j] - f.upper[j], shell ? corr : 0.0, 1e-12);
        EXPECT_NEAR(a.lower[j] - f.lower[j], shell ? corr : 0.0, 1e-12);
        if (shell) {
            EXPECT_NEAR(a.diag[j] - f.diag[j], corr, 1e-12);
            EXPECT_NEAR(a.diag[j + 1] - f.diag[j + 1], corr, 1e-12);
        }
    }
}

TEST(Oracle, DeltaPrimeCouplingIsSymmetric) {
    const double beta = 0.3, h = 1.0 / 16;
    const auto op = discretize(std::nullopt, delta_prime_interaction(beta), LatticeGeometry(1.0), h,
                               OracleDomain{0.0, 3.0, false});
    for (std::size_t j = 0; j + 1 < op.size(); ++j) EXPECT_DOUBLE_EQ(op.upper[j], op.lower[j]);
    // face at 1/2 carries the shell: the flux is (f_r - f_l) / (h + beta)
    EXPECT_NEAR(op.upper[7], -1.0 / (h * (h + beta)), 1e-9);
}

TEST(Oracle, GridMisaligned) {
    const LatticeGeometry g(1.0);
    const OracleDomain dom{0.0, 10.5, false};
    EXPECT_THROW((void)discretize(ChannelSpec(3, 0), delta_interaction(1.0), g, 1.0 / 63, dom), GridMisaligned);
    EXPECT_THROW((void)discretize(ChannelSpec(3, 0), delta_interaction(1.0), g, 1.0 / 3, dom), GridMisaligned);
    EXPECT_THROW((void)discretize(ChannelSpec(3, 0), delta_interaction(1.0), g, 1.0 / 64, OracleDomain{0.0, 10.51}),
                 GridMisaligned);
    EXPECT_NO_THROW((void)discretize(ChannelSpec(3, 0), delta_interaction(1.0), g, 1.0 / 64, dom));
}

TEST(Oracle, PeriodicBoxGroundState) {
    const LatticeGeometry g(1.0);
    for (const auto& p : {delta_interaction(1.0), delta_interaction(-2.0), delta_prime_interaction(1.0),
                          make_interaction(0.2, -0.5, 1.5, 0.6)}) {
        const double e0 = spectrum_bottom(p, g);
        EXPECT_NEAR(periodic_box_ground_state(p, g, 20), e0, 1e-3 * std::max(1.0, std::abs(e0)));
    }
}

TEST(Oracle, RadialFreeMatchesBessel) {
    // nu = 3, l = 0 in a ball of radius R: E = (k pi / R)^2
    const LatticeGeometry g(1.0);
    const double r = 8.5;
    const auto ev = oracle_channel_eigenvalues(ChannelSpec(3, 0), free_interaction(), g, r, 0.0, 1.0);
    ASSERT_EQ(ev.size(), 2u);
    EXPECT_NEAR(ev[0], std::pow(pi / r, 2), 1e-7);
    EXPECT_NEAR(ev[1], std::pow(2 * pi / r, 2), 1e-7);
}

TEST(Oracle, CountsMatchWronskianZeros) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 6; ++t) {
        InteractionParams p = free_interaction();
        if (t % 3 == 0) {
            p = delta_interaction(2.0 * u(rng));
        } else if (t % 3 == 1) {
            p = delta_prime_interaction(u(rng));
        } else {
            const double gm = 1.0 + 0.5 * u(rng), dl = 1.0 + 0.5 * u(rng), be = 0.5 * u(rng);
            p = make_interaction((gm * dl - 1.0) / be, be, gm, dl);
        }
        const LatticeGeometry g(1.0 + 0.5 * u(rng));
        const ChannelSpec ch(2 + t % 2, t % 4);
        const double r_max = 12.5 * g.d;
        const auto op = discretize_channel(ch, p, g, r_max);
        const Gap gap = nth_gap(p, g, 1);
        const double probe = 0.5 * (gap.lower + gap.upper);
        const double floor = kth_eigenvalue(op, 0) - 1.0;
        EXPECT_EQ(count_below(op, probe) - count_below(op, floor),
                  count_wronskian_zeros(ch, p, g, floor, probe, RadialDomain{0.0, r_max}, origin_condition(ch)))
            << "configuration " << t;
    }
}
