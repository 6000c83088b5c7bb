#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "wppg/theory.hpp"

using namespace wppg;

namespace {

// One state, two identical actions: V = r / (1 - gamma) at tau = 0.
FiniteMdp single_state_mdp(double r, double gamma) {
    FiniteMdp mdp;
    mdp.n_states = 1;
    mdp.grid = ActionGrid::uniform(2, -1, 1);
    mdp.gamma = gamma;
    mdp.rho = {1.0};
    mdp.reward = Mat(1, 2, Vec{r, r});
    mdp.transitions = {Mat(2, 1, Vec{1.0, 1.0})};
    mdp.validate();
    return mdp;
}

// Bellman-iteration oracle for the soft value of a fixed policy.
Vec soft_value_iteration_oracle(const FiniteMdp& mdp, const TabularPolicy& pi, double tau, std::size_t iters) {
    const std::size_t S = mdp.n_states, A = mdp.n_actions();
    Vec v(S, 0.0);
    for (std::size_t it = 0; it < iters; ++it) {
        Vec vn(S, 0.0);
        for (std::size_t s = 0; s < S; ++s) {
            double acc = 0.0, ent = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                const double w = pi.w(s, a);
                if (w <= 0.0) continue;
                double boot = 0.0;
                for (std::size_t s2 = 0; s2 < S; ++s2) boot += mdp.transitions[s](a, s2) * v[s2];
                acc += w * (mdp.reward(s, a) + mdp.gamma * boot);
                ent += w * std::log(w);
            }
            vn[s] = acc - tau * ent;
        }
        v = vn;
    }
    return v;
}

// Truncated-series oracle for the discounted visitation.
Vec visitation_series_oracle(const FiniteMdp& mdp, const TabularPolicy& pi, const Vec& rho, std::size_t terms) {
    const std::size_t S = mdp.n_states;
    Mat p_pi(S, S, 0.0);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a)
            for (std::size_t s2 = 0; s2 < S; ++s2) p_pi(s, s2) += pi.w(s, a) * mdp.transitions[s](a, s2);
    Vec cur = rho, acc(S, 0.0);
    double discount = 1.0;
    for (std::size_t t = 0; t < terms; ++t) {
        for (std::size_t s = 0; s < S; ++s) acc[s] += discount * cur[s];
        Vec next(S, 0.0);
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t s2 = 0; s2 < S; ++s2) next[s2] += cur[s] * p_pi(s, s2);
        cur = next;
        discount *= mdp.gamma;
    }
    for (double& v : acc) v *= 1.0 - mdp.gamma;
    return acc;
}

double prox_objective(const Vec& qvals, const GridDistribution& q, const GridDistribution& pi_k, double tau,
                      double eta) {
    double lin = 0.0;
    for (std::size_t i = 0; i < q.w.size(); ++i) lin += qvals[i] * q.w[i];
    return lin - tau * negative_entropy(q) - w2_squared(q, pi_k) / (2.0 * eta);
}

}  // namespace

TEST(EvaluateSoft, GeometricSeries) {
    const FiniteMdp mdp = single_state_mdp(1.0, 0.9);
    const TabularPolicy pi(mdp.grid, Mat(1, 2, Vec{1.0, 0.0}));
    const SoftValues vals = evaluate_soft(mdp, pi, 0.0);
    EXPECT_NEAR(vals.v[0], 10.0, 1e-10);
    EXPECT_NEAR(vals.q(0, 0), 10.0, 1e-10);
}

TEST(EvaluateSoft, EntropyOnlyValue) {
    Rng rng(1);
    FiniteMdp mdp = random_mdp(3, 7, 0.9, rng);
    for (double& v : mdp.reward.data) v = 0.0;
    const TabularPolicy pi = TabularPolicy::uniform(mdp);
    const double tau = 0.25;
    const SoftValues vals = evaluate_soft(mdp, pi, tau);
    const double expected = tau * std::log(7.0) / (1.0 - mdp.gamma);
    for (double v : vals.v) EXPECT_NEAR(v, expected, 1e-9);
}

TEST(EvaluateSoft, MatchesIterationOracle) {
    Rng rng(2);
    const FiniteMdp mdp = random_mdp(3, 9, 0.9, rng);
    const TabularPolicy pi = random_policy(mdp, rng);
    const SoftValues vals = evaluate_soft(mdp, pi, 0.15);
    const Vec oracle = soft_value_iteration_oracle(mdp, pi, 0.15, 10000);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(vals.v[s], oracle[s], 1e-6);
}

TEST(EvaluateSoft, AdvantageCentering) {
    Rng rng(3);
    const FiniteMdp mdp = random_mdp(4, 11, 0.9, rng);
    const TabularPolicy pi = random_policy(mdp, rng);
    const double tau = 0.2;
    const SoftValues vals = evaluate_soft(mdp, pi, tau);
    for (std::size_t s = 0; s < 4; ++s) {
        double qpi = 0.0, ent = 0.0;
        for (std::size_t a = 0; a < 11; ++a) {
            qpi += vals.q(s, a) * pi.w(s, a);
            ent += pi.w(s, a) * std::log(pi.w(s, a));
        }
        EXPECT_NEAR(qpi - vals.v[s], tau * ent, 1e-8);
    }
}

TEST(DiscountedVisitation, SingleStateAndAbsorbingChain) {
    const FiniteMdp one = single_state_mdp(0.5, 0.7);
    const TabularPolicy pi1 = TabularPolicy::uniform(one);
    const Vec d1 = discounted_visitation(one, pi1, one.rho);
    EXPECT_NEAR(d1[0], 1.0, 1e-12);

    FiniteMdp chain;
    chain.n_states = 2;
    chain.grid = ActionGrid::uniform(2, -1, 1);
    chain.gamma = 0.5;
    chain.rho = {1.0, 0.0};
    chain.reward = Mat(2, 2, Vec{0, 0, 0, 0});
    chain.transitions = {Mat(2, 2, Vec{0, 1, 0, 1}), Mat(2, 2, Vec{0, 1, 0, 1})};
    chain.validate();
    const TabularPolicy pi2 = TabularPolicy::uniform(chain);
    const Vec d2 = discounted_visitation(chain, pi2, chain.rho);
    EXPECT_NEAR(d2[0], 0.5, 1e-12);
    EXPECT_NEAR(d2[1], 0.5, 1e-12);
}

TEST(DiscountedVisitation, MatchesTruncatedSeries) {
    Rng rng(4);
    const FiniteMdp mdp = random_mdp(4, 5, 0.9, rng);
    const TabularPolicy pi = random_policy(mdp, rng);
    const Vec d = discounted_visitation(mdp, pi, mdp.rho);
    const Vec oracle = visitation_series_oracle(mdp, pi, mdp.rho, 200);
    double sum = 0.0;
    for (std::size_t s = 0; s < 4; ++s) {
        EXPECT_NEAR(d[s], oracle[s], 1e-6);
        sum += d[s];
    }
    EXPECT_NEAR(sum, 1.0, 1e-10);
}

TEST(StationaryDistribution, IsInvariantUnderPolicyChain) {
    Rng rng(5);
    const FiniteMdp mdp = random_mdp(4, 6, 0.9, rng);
    const TabularPolicy pi = random_policy(mdp, rng);
    const Vec nu = stationary_distribution(mdp, pi);
    double sum = 0.0;
    Vec pushed(4, 0.0);
    for (std::size_t s = 0; s < 4; ++s) {
        sum += nu[s];
        for (std::size_t a = 0; a < 6; ++a)
            for (std::size_t s2 = 0; s2 < 4; ++s2) pushed[s2] += nu[s] * pi.w(s, a) * mdp.transitions[s](a, s2);
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t s = 0; s < 4; ++s) EXPECT_NEAR(pushed[s], nu[s], 1e-12);
}

TEST(PerfDiff, IdenticalPoliciesGiveZero) {
    Rng rng(6);
    const FiniteMdp mdp = random_mdp(3, 5, 0.9, rng);
    const TabularPolicy pi = random_policy(mdp, rng);
    EXPECT_NEAR(perf_diff_residual(mdp, pi, pi, 0.1), 0.0, 1e-10);
}

TEST(PerfDiff, HoldsOnRandomPairs) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const FiniteMdp mdp = random_mdp(3, 5, 0.9, rng);
        const TabularPolicy a = random_policy(mdp, rng);
        const TabularPolicy b = random_policy(mdp, rng);
        EXPECT_LT(perf_diff_residual(mdp, a, b, 0.1), 1e-8);
    }
}

TEST(PerfDiff, SoftmaxImprovementRaisesValues) {
    Rng rng(8);
    const FiniteMdp mdp = random_mdp(3, 7, 0.9, rng);
    const TabularPolicy pi = random_policy(mdp, rng);
    const double tau = 0.1;
    const SoftValues vals = evaluate_soft(mdp, pi, tau);

    Mat w(3, 7);
    for (std::size_t s = 0; s < 3; ++s) {
        double mx = -1e300;
        for (std::size_t a = 0; a < 7; ++a) mx = std::max(mx, vals.q(s, a) / tau);
        double sum = 0.0;
        for (std::size_t a = 0; a < 7; ++a) {
            w(s, a) = std::exp(vals.q(s, a) / tau - mx);
            sum += w(s, a);
        }
        for (std::size_t a = 0; a < 7; ++a) w(s, a) /= sum;
    }
    const TabularPolicy improved(mdp.grid, std::move(w));
    EXPECT_LT(perf_diff_residual(mdp, pi, improved, tau), 1e-8);
    const SoftValues vnew = evaluate_soft(mdp, improved, tau);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_GE(vnew.v[s], vals.v[s] - 1e-10);
}

TEST(SteadyStateIdentity, HoldsWithStationaryWeighting) {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const FiniteMdp mdp = random_mdp(3, 7, 0.9, rng);
        const double tau = 0.1;
        const OptimalSoftPolicy opt = optimal_soft_policy(mdp, tau, 1e-12);
        const TabularPolicy pi = random_policy(mdp, rng);
        EXPECT_LT(steady_state_identity_residual(mdp, pi, opt.pi, tau), 1e-6);
    }
}

TEST(OptimalSoftPolicy, EntropyDominatedLimitIsUniform) {
    Rng rng(10);
    const FiniteMdp mdp = random_mdp(3, 9, 0.9, rng);
    const OptimalSoftPolicy opt = optimal_soft_policy(mdp, 1000.0, 1e-10);
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 9; ++a) EXPECT_NEAR(opt.pi.w(s, a), 1.0 / 9.0, 1e-3);
}

TEST(OptimalSoftPolicy, OneStateSoftmaxClosedForm) {
    FiniteMdp mdp;
    mdp.n_states = 1;
    mdp.grid = ActionGrid::uniform(5, -1, 1);
    mdp.gamma = 0.5;
    mdp.rho = {1.0};
    mdp.reward = Mat(1, 5);
    for (std::size_t a = 0; a < 5; ++a) mdp.reward(0, a) = 2.0 * mdp.grid.points[a];
    mdp.transitions = {Mat(5, 1, Vec(5, 1.0))};
    mdp.validate();
    const double tau = 0.3;
    const OptimalSoftPolicy opt = optimal_soft_policy(mdp, tau, 1e-12);
    // Q(a) = r(a) + const, so pi* = softmax(r / tau)
    double mx = -1e300;
    for (std::size_t a = 0; a < 5; ++a) mx = std::max(mx, mdp.reward(0, a) / tau);
    double sum = 0.0;
    Vec expected(5);
    for (std::size_t a = 0; a < 5; ++a) {
        expected[a] = std::exp(mdp.reward(0, a) / tau - mx);
        sum += expected[a];
    }
    for (std::size_t a = 0; a < 5; ++a) EXPECT_NEAR(opt.pi.w(0, a), expected[a] / sum, 1e-9);
}

TEST(OptimalSoftPolicy, BellmanResidualVanishes) {
    Rng rng(11);
    const FiniteMdp mdp = random_mdp(4, 8, 0.95, rng);
    const OptimalSoftPolicy opt = optimal_soft_policy(mdp, 0.2, 1e-11);
    EXPECT_LT(opt.bellman_residual, 1e-10);
}

TEST(ExactProx, EntropyDominatedGivesUniform) {
    Rng rng(12);
    const ActionGrid grid = ActionGrid::uniform(21, -1, 1);
    Vec w(21);
    for (double& v : w) v = rng.uniform(0.01, 1.0);
    const auto pi_k = GridDistribution::normalized(grid, std::move(w));
    const ProxResult res = exact_prox_step(Vec(21, 0.0), pi_k, 1.0, 1e6);
    EXPECT_TRUE(res.converged);
    for (double v : res.q.w) EXPECT_NEAR(v, 1.0 / 21.0, 1e-4);
}

TEST(ExactProx, TinyEtaAnchorsToPrevious) {
    Rng rng(13);
    const ActionGrid grid = ActionGrid::uniform(21, -1, 1);
    Vec w(21);
    for (double& v : w) v = rng.uniform(0.01, 1.0);
    const auto pi_k = GridDistribution::normalized(grid, std::move(w));
    Vec qvals(21);
    for (double& v : qvals) v = rng.uniform(-1, 1);
    const ProxResult res = exact_prox_step(qvals, pi_k, 0.1, 1e-6);
    EXPECT_LT(w2(res.q, pi_k), 1e-3);
}

TEST(ExactProx, BeatsBaselinesAndRandomSearch) {
    Rng rng(14);
    const ActionGrid grid = ActionGrid::uniform(11, -1, 1);
    const double tau = 0.1, eta = 0.5;
    for (int trial = 0; trial < 3; ++trial) {
        Vec w(11);
        for (double& v : w) v = rng.uniform(0.01, 1.0);
        const auto pi_k = GridDistribution::normalized(grid, std::move(w));
        Vec qvals(11);
        for (double& v : qvals) v = rng.uniform(-1, 1);

        const ProxResult res = exact_prox_step(qvals, pi_k, tau, eta);
        const double ours = prox_objective(qvals, res.q, pi_k, tau, eta);

        EXPECT_GE(ours, prox_objective(qvals, pi_k, pi_k, tau, eta) - 1e-9);
        EXPECT_GE(ours, prox_objective(qvals, GridDistribution::uniform(grid), pi_k, tau, eta) - 1e-9);

        double best_random = -1e300;
        for (int restart = 0; restart < 10000; ++restart) {
            Vec rw(11);
            for (double& v : rw) v = -std::log(std::max(rng.uniform(), 1e-300));
            const auto cand = GridDistribution::normalized(grid, std::move(rw));
            best_random = std::max(best_random, prox_objective(qvals, cand, pi_k, tau, eta));
        }
        EXPECT_GE(ours, best_random - 1e-6);
    }
}

TEST(ExactProx, OutputKeepsFullSupport) {
    Rng rng(15);
    const ActionGrid grid = ActionGrid::uniform(21, -1, 1);
    for (int trial = 0; trial < 5; ++trial) {
        Vec w(21);
        for (double& v : w) v = rng.uniform(0.001, 1.0);
        const auto pi_k = GridDistribution::normalized(grid, std::move(w));
        Vec qvals(21);
        for (double& v : qvals) v = rng.uniform(-1, 1);
        const ProxResult res = exact_prox_step(qvals, pi_k, 0.1, 0.5);
        double mn = 1.0;
        for (double v : res.q.w) mn = std::min(mn, v);
        EXPECT_GT(mn, 0.0);
    }
}

TEST(SplitStep, ZeroTauIsPureTransport) {
    Rng rng(16);
    const ActionGrid grid = ActionGrid::uniform(21, -1, 1);
    Vec w(21);
    for (double& v : w) v = rng.uniform(0.01, 1.0);
    const auto pi_k = GridDistribution::normalized(grid, std::move(w));
    Vec qvals(21);
    for (double& v : qvals) v = rng.uniform(-1, 1);
    const auto split = split_step(qvals, pi_k, 0.0, 0.3);
    const auto transport = transport_step(pi_k, qvals, 0.3);
    EXPECT_EQ(split.w, transport.w);
}

TEST(SplitStep, ZeroQIsHeatOnly) {
    Rng rng(17);
    const ActionGrid grid = ActionGrid::uniform(21, -1, 1);
    Vec w(21);
    for (double& v : w) v = rng.uniform(0.01, 1.0);
    const auto pi_k = GridDistribution::normalized(grid, std::move(w));
    const double tau = 0.1, eta = 0.2;
    const auto split = split_step(Vec(21, 0.0), pi_k, tau, eta);
    const auto heat = heat_step(pi_k, 2.0 * tau * eta);
    EXPECT_EQ(split.w, heat.w);
}

TEST(SplitStep, ApproachesExactProxAsEtaShrinks) {
    Rng rng(18);
    const ActionGrid grid = ActionGrid::uniform(21, -1, 1);
    double gap_large = 0.0, gap_small = 0.0;
    const double tau = 0.1;
    for (int trial = 0; trial < 3; ++trial) {
        Vec w(21);
        for (double& v : w) v = rng.uniform(0.01, 1.0);
        const auto pi_k = GridDistribution::normalized(grid, std::move(w));
        Vec qvals(21);
        const double c1 = rng.uniform(-1, 1), c2 = rng.uniform(-1, 1), c3 = rng.uniform(-1, 1);
        for (std::size_t i = 0; i < 21; ++i) {
            const double x = grid.points[i];
            qvals[i] = c1 * x + c2 * x * x + c3 * std::cos(3.0 * x);
        }
        gap_large += w2(split_step(qvals, pi_k, tau, 0.4), exact_prox_step(qvals, pi_k, tau, 0.4).q);
        gap_small += w2(split_step(qvals, pi_k, tau, 0.05), exact_prox_step(qvals, pi_k, tau, 0.05).q);
    }
    EXPECT_LT(gap_small, gap_large);
}

TEST(WppgIterate, OptimalPolicyIsFixedPoint) {
    const FiniteMdp mdp = builtin3_mdp();
    const double tau = 0.1, eta = 0.5;
    const OptimalSoftPolicy opt = optimal_soft_policy(mdp, tau, 1e-12);
    const WppgTrajectory traj = wppg_iterate(mdp, opt.pi, tau, eta, 8, ProxMode::Exact);
    for (const auto& rec : traj.records) {
        EXPECT_LT(traj.j_star - rec.j, 1e-6);
        EXPECT_LT(rec.d, 1e-6);
    }
}

TEST(WppgIterate, MonotoneImprovementInExactMode) {
    Rng rng(19);
    const FiniteMdp mdp = random_mdp(3, 11, 0.9, rng);
    const TabularPolicy pi0 = TabularPolicy::uniform(mdp);
    const WppgTrajectory traj = wppg_iterate(mdp, pi0, 0.1, 0.5, 15, ProxMode::Exact);
    for (std::size_t k = 0; k + 1 < traj.records.size(); ++k) {
        for (std::size_t s = 0; s < mdp.n_states; ++s)
            EXPECT_GE(traj.records[k + 1].v[s], traj.records[k].v[s] - 1e-8);
        EXPECT_GE(traj.records[k + 1].j, traj.records[k].j - 1e-8);
    }
}

TEST(WppgIterate, ContractsOnBuiltin3) {
    const FiniteMdp mdp = builtin3_mdp();
    const WppgTrajectory traj = wppg_iterate(mdp, TabularPolicy::uniform(mdp), 0.1, 0.5, 20, ProxMode::Exact);
    const ContractionFit fit = fit_contraction(traj, 0.1);
    EXPECT_LE(fit.ratio, 0.95);
    EXPECT_GT(fit.ratio, 0.0);
}

TEST(Builtin3, IsValidAndErgodic) {
    const FiniteMdp mdp = builtin3_mdp();
    EXPECT_EQ(mdp.n_states, 3u);
    EXPECT_EQ(mdp.n_actions(), 21u);
    EXPECT_NO_THROW(mdp.validate());
    for (const auto& p : mdp.transitions)
        for (double v : p.data) EXPECT_GT(v, 0.0);
}
