#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "wppg/ot1d.hpp"

using namespace wppg;

namespace {

const ActionGrid kGrid = ActionGrid::uniform(21, -1.0, 1.0);

GridDistribution random_dist(const ActionGrid& g, Rng& rng, std::size_t support = 0) {
    Vec w(g.size(), 0.0);
    if (support == 0 || support >= g.size()) {
        for (double& v : w) v = -std::log(std::max(rng.uniform(), 1e-300));
    } else {
        for (std::size_t k = 0; k < support; ++k) {
            std::size_t i;
            do {
                i = rng.index(g.size());
            } while (w[i] > 0.0);
            w[i] = -std::log(std::max(rng.uniform(), 1e-300));
        }
    }
    return GridDistribution::normalized(g, std::move(w));
}

// LP oracle over the support atoms, half cost.
oracles::TransportLp lp_oracle(const GridDistribution& p, const GridDistribution& q, std::vector<std::size_t>* sp_out,
                               std::vector<std::size_t>* sq_out) {
    std::vector<std::size_t> sp, sq;
    Vec supply, demand;
    for (std::size_t i = 0; i < p.w.size(); ++i)
        if (p.w[i] > 0) {
            sp.push_back(i);
            supply.push_back(p.w[i]);
        }
    for (std::size_t j = 0; j < q.w.size(); ++j)
        if (q.w[j] > 0) {
            sq.push_back(j);
            demand.push_back(q.w[j]);
        }
    auto cost = [&](std::size_t a, std::size_t b) {
        const double d = p.grid.points[sp[a]] - q.grid.points[sq[b]];
        return 0.5 * d * d;
    };
    if (sp_out) *sp_out = sp;
    if (sq_out) *sq_out = sq;
    return oracles::solve_transport_lp(supply, demand, cost);
}

}  // namespace

TEST(ActionGridType, ValidatesShape) {
    EXPECT_THROW(ActionGrid({1.0, 0.5}), std::invalid_argument);
    EXPECT_THROW(ActionGrid({0.0, 0.1, 0.3}), std::invalid_argument);
    const ActionGrid g = ActionGrid::uniform(5, -1, 1);
    EXPECT_DOUBLE_EQ(g.spacing, 0.5);
}

TEST(GridDistributionType, ValidatesWeights) {
    const ActionGrid g = ActionGrid::uniform(3, 0, 1);
    EXPECT_THROW(GridDistribution(g, {0.5, 0.4, 0.2}), std::invalid_argument);
    EXPECT_THROW(GridDistribution(g, {-0.1, 0.6, 0.5}), std::invalid_argument);
    EXPECT_NO_THROW(GridDistribution(g, {0.25, 0.25, 0.5}));
}

TEST(W2Squared, IdentityAndDiracs) {
    const auto p = GridDistribution::dirac(kGrid, 10);
    EXPECT_DOUBLE_EQ(w2_squared(p, p), 0.0);

    const ActionGrid g2 = ActionGrid::uniform(3, 0.0, 2.0);  // points 0, 1, 2
    const auto d0 = GridDistribution::dirac(g2, 0);
    const auto d1 = GridDistribution::dirac(g2, 1);
    EXPECT_DOUBLE_EQ(w2_squared(d0, d1), 1.0);
    EXPECT_DOUBLE_EQ(half_cost(d0, d1), 0.5);
}

TEST(W2Squared, MonotoneShiftPair) {
    const ActionGrid g = ActionGrid::uniform(3, 0.0, 2.0);  // 0, 1, 2
    const GridDistribution p(g, {0.5, 0.5, 0.0});
    const GridDistribution q(g, {0.0, 0.5, 0.5});
    EXPECT_NEAR(w2_squared(p, q), 1.0, 1e-15);
    const auto lp = lp_oracle(p, q, nullptr, nullptr);
    EXPECT_NEAR(half_cost(p, q), lp.cost, 1e-12);
}

TEST(W2Squared, GridMismatchThrows) {
    const auto p = GridDistribution::uniform(kGrid);
    const auto q = GridDistribution::uniform(ActionGrid::uniform(11, -1, 1));
    EXPECT_THROW(w2_squared(p, q), std::invalid_argument);
}

TEST(W2Squared, MatchesLpOracleOnRandomInstances) {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_dist(kGrid, rng, 4);
        const auto q = random_dist(kGrid, rng, 4);
        const auto lp = lp_oracle(p, q, nullptr, nullptr);
        EXPECT_NEAR(half_cost(p, q), lp.cost, 1e-10);
    }
}

TEST(Potentials, DiracCases) {
    const auto d = GridDistribution::dirac(kGrid, 5);
    const auto pot = potentials(d, d);
    EXPECT_NEAR(pot.phi[5], 0.0, 1e-15);
    EXPECT_NEAR(pot.psi[5], 0.0, 1e-15);

    const ActionGrid g2 = ActionGrid::uniform(2, 0.0, 1.0);
    const auto a = GridDistribution::dirac(g2, 0);
    const auto b = GridDistribution::dirac(g2, 1);
    const auto pab = potentials(a, b);
    EXPECT_NEAR(pab.phi[0], 0.0, 1e-15);
    EXPECT_NEAR(pab.psi[1], 0.5, 1e-15);
}

TEST(Potentials, FeasibleAndTightOnRandomInstances) {
    Rng rng(202);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t support = 2 + trial % 7;
        const auto p = random_dist(kGrid, rng, support);
        const auto q = random_dist(kGrid, rng, support);
        const auto pot = potentials(p, q);
        const auto lp = lp_oracle(p, q, nullptr, nullptr);

        // zero duality gap against the LP oracle's optimal cost
        double attained = 0.0;
        for (std::size_t i = 0; i < kGrid.size(); ++i) attained += pot.phi[i] * p.w[i] + pot.psi[i] * q.w[i];
        EXPECT_NEAR(attained, lp.cost, 1e-9);
        EXPECT_NEAR(pot.half_cost, lp.cost, 1e-9);

        // dual feasibility on every grid pair
        for (std::size_t i = 0; i < kGrid.size(); ++i)
            for (std::size_t j = 0; j < kGrid.size(); ++j) {
                const double c = 0.5 * (kGrid.points[i] - kGrid.points[j]) * (kGrid.points[i] - kGrid.points[j]);
                EXPECT_LE(pot.phi[i] + pot.psi[j], c + 1e-9);
            }
    }
}

TEST(Potentials, FullSupportInstances) {
    Rng rng(203);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_dist(kGrid, rng);
        const auto q = random_dist(kGrid, rng);
        const auto pot = potentials(p, q);
        double attained = 0.0;
        for (std::size_t i = 0; i < kGrid.size(); ++i) attained += pot.phi[i] * p.w[i] + pot.psi[i] * q.w[i];
        EXPECT_NEAR(attained, half_cost(p, q), 1e-10);
        for (std::size_t i = 0; i < kGrid.size(); ++i)
            for (std::size_t j = 0; j < kGrid.size(); ++j) {
                const double c = 0.5 * (kGrid.points[i] - kGrid.points[j]) * (kGrid.points[i] - kGrid.points[j]);
                EXPECT_LE(pot.phi[i] + pot.psi[j], c + 1e-9);
            }
    }
}

TEST(SupportingHyperplane, IdentityAndPropertyAndQInstance) {
    Rng rng(303);
    const auto p = random_dist(kGrid, rng);
    const auto q = random_dist(kGrid, rng);
    EXPECT_NEAR(supporting_hyperplane_residual(p, q, p), 0.0, 1e-12);
    EXPECT_GE(supporting_hyperplane_residual(p, q, q), -1e-9);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_dist(kGrid, rng, 1 + trial % 8);
        const auto b = random_dist(kGrid, rng, 1 + (trial / 2) % 8);
        const auto r = random_dist(kGrid, rng, 1 + (trial / 3) % 8);
        EXPECT_GE(supporting_hyperplane_residual(a, b, r), -1e-9);
    }
}

TEST(NegativeEntropy, KnownValues) {
    EXPECT_DOUBLE_EQ(negative_entropy(GridDistribution::dirac(kGrid, 3)), 0.0);
    EXPECT_NEAR(negative_entropy(GridDistribution::uniform(kGrid)), -std::log(21.0), 1e-12);
    const ActionGrid g2 = ActionGrid::uniform(2, 0, 1);
    const GridDistribution p(g2, {0.75, 0.25});
    EXPECT_NEAR(negative_entropy(p), 0.75 * std::log(0.75) + 0.25 * std::log(0.25), 1e-12);
}

TEST(Kl, KnownValuesAndSupportViolation) {
    const auto u = GridDistribution::uniform(kGrid);
    EXPECT_DOUBLE_EQ(kl(u, u), 0.0);
    EXPECT_NEAR(kl(GridDistribution::dirac(kGrid, 4), u), std::log(21.0), 1e-12);
    EXPECT_TRUE(std::isinf(kl(u, GridDistribution::dirac(kGrid, 4))));

    Rng rng(404);
    const auto p = random_dist(kGrid, rng);
    const auto q = random_dist(kGrid, rng);
    double manual = 0.0;
    for (std::size_t i = 0; i < kGrid.size(); ++i) manual += p.w[i] * std::log(p.w[i] / q.w[i]);
    EXPECT_NEAR(kl(p, q), manual, 1e-12);
}

TEST(Kl, NonNegativeAndZeroOnlyAtEquality) {
    Rng rng(405);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_dist(kGrid, rng);
        const auto q = random_dist(kGrid, rng);
        EXPECT_GT(kl(p, q), 0.0);
    }
    const auto p = random_dist(kGrid, rng);
    EXPECT_NEAR(kl(p, p), 0.0, 1e-14);
}

TEST(HeatStep, IdentityAtZeroVariance) {
    Rng rng(505);
    const auto p = random_dist(kGrid, rng);
    const auto out = heat_step(p, 0.0);
    EXPECT_EQ(out.w, p.w);
}

TEST(HeatStep, DiracSpreadsSymmetrically) {
    const auto d = GridDistribution::dirac(kGrid, 10);
    const double variance = std::pow(4.0 * kGrid.spacing, 2.0);
    const auto out = heat_step(d, variance);
    for (std::size_t off = 1; off <= 10; ++off) EXPECT_NEAR(out.w[10 - off], out.w[10 + off], 1e-14);
    // proportional to the Gaussian pdf at the grid offsets
    const double ratio = out.w[10 + 1] / out.w[10];
    const double d1 = kGrid.points[11] - kGrid.points[10];
    EXPECT_NEAR(ratio, std::exp(-d1 * d1 / (2.0 * variance)), 1e-12);
}

TEST(HeatStep, AddsVarianceAwayFromBoundary) {
    const ActionGrid wide = ActionGrid::uniform(201, -10.0, 10.0);
    Vec w(wide.size(), 0.0);
    // narrow blob in the middle
    for (int off = -3; off <= 3; ++off) w[static_cast<std::size_t>(100 + off)] = 1.0 / 7.0;
    const auto p = GridDistribution::normalized(wide, std::move(w));
    const double variance = 0.25;  // 6 sigma = 3 << 10
    const auto out = heat_step(p, variance);

    auto second_moment = [&](const GridDistribution& d) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < d.w.size(); ++i) {
            m1 += d.w[i] * wide.points[i];
            m2 += d.w[i] * wide.points[i] * wide.points[i];
        }
        return m2 - m1 * m1;
    };
    EXPECT_NEAR(second_moment(out), second_moment(p) + variance, 0.02 * (second_moment(p) + variance));
}

TEST(HeatStep, PreservesNormalizationAndPositivity) {
    Rng rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_dist(kGrid, rng, 1 + trial % 6);
        const auto out = heat_step(p, rng.uniform(0.001, 0.5));
        double sum = 0.0;
        for (double v : out.w) {
            EXPECT_GE(v, 0.0);
            sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(TransportStep, ConstantQKeepsAtoms) {
    Rng rng(707);
    const auto p = random_dist(kGrid, rng, 5);
    const auto out = transport_step(p, Vec(kGrid.size(), 3.7), 0.5);
    EXPECT_EQ(out.w, p.w);
}

TEST(TransportStep, LargeEtaMovesToArgmax) {
    const double a_star = 0.33;  // nearest grid point is 0.3
    Vec q(kGrid.size());
    for (std::size_t i = 0; i < kGrid.size(); ++i)
        q[i] = -0.5 * (kGrid.points[i] - a_star) * (kGrid.points[i] - a_star);
    Rng rng(708);
    const auto p = random_dist(kGrid, rng);
    const auto out = transport_step(p, q, 1e9);
    std::size_t best = 0;
    for (std::size_t i = 1; i < kGrid.size(); ++i)
        if (std::abs(kGrid.points[i] - a_star) < std::abs(kGrid.points[best] - a_star)) best = i;
    EXPECT_NEAR(out.w[best], 1.0, 1e-12);
}

TEST(TransportStep, MatchesBruteForcePerAtomArgmax) {
    Rng rng(709);
    for (int trial = 0; trial < 20; ++trial) {
        Vec q(kGrid.size());
        for (double& v : q) v = rng.uniform(-1, 1);
        const auto p = random_dist(kGrid, rng);
        const auto out = transport_step(p, q, 0.1);

        Vec expected(kGrid.size(), 0.0);
        for (std::size_t j = 0; j < kGrid.size(); ++j) {
            std::size_t best = 0;
            double best_val = -1e300;
            for (std::size_t i = 0; i < kGrid.size(); ++i) {
                const double d = kGrid.points[i] - kGrid.points[j];
                const double val = q[i] - d * d / (2.0 * 0.1);
                if (val > best_val) {
                    best_val = val;
                    best = i;
                }
            }
            expected[best] += p.w[j];
        }
        for (std::size_t i = 0; i < kGrid.size(); ++i) EXPECT_DOUBLE_EQ(out.w[i], expected[i]);
    }
}

TEST(TransportStep, PreservesMassExactly) {
    Rng rng(710);
    const auto p = random_dist(kGrid, rng);
    Vec q(kGrid.size());
    for (double& v : q) v = rng.uniform(-2, 2);
    const auto out = transport_step(p, q, 0.3);
    double sum = 0.0;
    for (double v : out.w) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(W2Metric, TriangleInequalityOnRandomTriples) {
    Rng rng(808);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = random_dist(kGrid, rng, 1 + trial % 9);
        const auto q = random_dist(kGrid, rng, 1 + (trial / 2) % 9);
        const auto r = random_dist(kGrid, rng, 1 + (trial / 3) % 9);
        EXPECT_LE(w2(p, r), w2(p, q) + w2(q, r) + 1e-9);
    }
}

TEST(CostConventions, HalfCostIsHalfOfW2Squared) {
    Rng rng(909);
    const auto p = random_dist(kGrid, rng);
    const auto q = random_dist(kGrid, rng);
    EXPECT_NEAR(2.0 * half_cost(p, q), w2_squared(p, q), 1e-15);
}
