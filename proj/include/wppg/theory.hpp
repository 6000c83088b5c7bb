#pragma once

// Finite-MDP laboratory with a gridded 1-D action space: exact soft policy
// evaluation, discounted visitation, the per-state Wasserstein proximal step
// (solved by entropic mirror ascent with Kantorovich-potential supergradients),
// the transport+heat splitting, and the iterated scheme with its contraction
// diagnostics.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "wppg/numeric.hpp"
#include "wppg/ot1d.hpp"

namespace wppg {

struct FiniteMdp {
    std::size_t n_states = 0;
    ActionGrid grid;
    std::vector<Mat> transitions;  // per state: (n_actions x n_states), rows sum to 1
    Mat reward;                    // n_states x n_actions
    double gamma = 0.9;
    Vec rho;                       // initial state distribution

    std::size_t n_actions() const { return grid.size(); }

    void validate() const {
        if (n_states == 0) throw std::invalid_argument("FiniteMdp: need at least one state");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("FiniteMdp: gamma must be in (0,1)");
        if (transitions.size() != n_states || reward.rows != n_states || reward.cols != n_actions() ||
            rho.size() != n_states)
            throw std::invalid_argument("FiniteMdp: shape mismatch");
        for (const Mat& p : transitions) {
            if (p.rows != n_actions() || p.cols != n_states) throw std::invalid_argument("FiniteMdp: P shape");
            for (std::size_t a = 0; a < p.rows; ++a) {
                double sum = 0.0;
                for (std::size_t s2 = 0; s2 < p.cols; ++s2) {
                    if (p(a, s2) < 0.0) throw std::invalid_argument("FiniteMdp: negative transition probability");
                    sum += p(a, s2);
                }
                if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("FiniteMdp: P row does not sum to 1");
            }
        }
        for (double v : reward.data)
            if (!std::isfinite(v)) throw std::invalid_argument("FiniteMdp: non-finite reward");
    }
};

struct TabularPolicy {
    ActionGrid grid;
    Mat w;  // n_states x n_actions, each row a distribution

    TabularPolicy() = default;
    TabularPolicy(ActionGrid g, Mat weights) : grid(std::move(g)), w(std::move(weights)) {
        for (std::size_t s = 0; s < w.rows; ++s) row(s);  // runs the GridDistribution checks
    }

    GridDistribution row(std::size_t s) const {
        return GridDistribution(grid, Vec(w.row(s), w.row(s) + w.cols));
    }

    void set_row(std::size_t s, const GridDistribution& d) {
        std::copy(d.w.begin(), d.w.end(), w.row(s));
    }

    static TabularPolicy uniform(const FiniteMdp& mdp) {
        Mat weights(mdp.n_states, mdp.n_actions(), 1.0 / static_cast<double>(mdp.n_actions()));
        return TabularPolicy(mdp.grid, std::move(weights));
    }
};

struct SoftValues {
    Vec v;  // per state
    Mat q;  // n_states x n_actions
};

namespace theory_detail {

inline Mat policy_transition(const FiniteMdp& mdp, const TabularPolicy& pi) {
    Mat out(mdp.n_states, mdp.n_states, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double pw = pi.w(s, a);
            if (pw == 0.0) continue;
            for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) out(s, s2) += pw * mdp.transitions[s](a, s2);
        }
    return out;
}

inline double row_neg_entropy(const Mat& w, std::size_t s) {
    double acc = 0.0;
    for (std::size_t a = 0; a < w.cols; ++a)
        if (w(s, a) > 0.0) acc += w(s, a) * std::log(w(s, a));
    return acc;
}

}  // namespace theory_detail

/// Exact V_tau^pi by solving (I - gamma P_pi) V = R_pi - tau H_pi, then
/// Q_tau^pi(s,a) = r(s,a) + gamma sum_s' P(s'|s,a) V(s').
inline SoftValues evaluate_soft(const FiniteMdp& mdp, const TabularPolicy& pi, double tau) {
    const std::size_t S = mdp.n_states, A = mdp.n_actions();
    const Mat p_pi = theory_detail::policy_transition(mdp, pi);
    Mat lhs(S, S, 0.0);
    Vec rhs(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t s2 = 0; s2 < S; ++s2) lhs(s, s2) = (s == s2 ? 1.0 : 0.0) - mdp.gamma * p_pi(s, s2);
        double r_pi = 0.0;
        for (std::size_t a = 0; a < A; ++a) r_pi += pi.w(s, a) * mdp.reward(s, a);
        rhs[s] = r_pi - tau * theory_detail::row_neg_entropy(pi.w, s);
    }
    SoftValues out;
    out.v = solve_linear(lhs, rhs);
    out.q = Mat(S, A);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a) {
            double boot = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) boot += mdp.transitions[s](a, s2) * out.v[s2];
            out.q(s, a) = mdp.reward(s, a) + mdp.gamma * boot;
        }
    return out;
}

/// d = (1-gamma) (I - gamma P_pi^T)^{-1} rho; sums to 1.
inline Vec discounted_visitation(const FiniteMdp& mdp, const TabularPolicy& pi, const Vec& rho) {
    if (rho.size() != mdp.n_states) throw std::invalid_argument("discounted_visitation: rho length mismatch");
    const std::size_t S = mdp.n_states;
    const Mat p_pi = theory_detail::policy_transition(mdp, pi);
    Mat lhs(S, S, 0.0);
    Vec rhs(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t s2 = 0; s2 < S; ++s2) lhs(s, s2) = (s == s2 ? 1.0 : 0.0) - mdp.gamma * p_pi(s2, s);
        rhs[s] = (1.0 - mdp.gamma) * rho[s];
    }
    return solve_linear(lhs, rhs);
}

/// Stationary distribution of P_pi (the chain is assumed ergodic, which holds
/// for the built-in and randomly generated MDPs whose transitions are strictly
/// positive).
inline Vec stationary_distribution(const FiniteMdp& mdp, const TabularPolicy& pi) {
    const std::size_t S = mdp.n_states;
    const Mat p_pi = theory_detail::policy_transition(mdp, pi);
    Mat lhs(S, S, 0.0);
    Vec rhs(S, 0.0);
    // nu^T P = nu^T rewritten as (P^T - I) nu = 0 with the first equation
    // replaced by the normalization sum(nu) = 1.
    for (std::size_t j = 0; j < S; ++j) lhs(0, j) = 1.0;
    rhs[0] = 1.0;
    for (std::size_t s = 1; s < S; ++s)
        for (std::size_t s2 = 0; s2 < S; ++s2) lhs(s, s2) = p_pi(s2, s) - (s == s2 ? 1.0 : 0.0);
    return solve_linear(lhs, rhs);
}

/// Max-over-start-states residual of the entropy-regularized performance
/// difference identity between pi_new and pi_old.
inline double perf_diff_residual(const FiniteMdp& mdp, const TabularPolicy& pi_old, const TabularPolicy& pi_new,
                                 double tau) {
    const std::size_t S = mdp.n_states, A = mdp.n_actions();
    const SoftValues old_vals = evaluate_soft(mdp, pi_old, tau);
    const SoftValues new_vals = evaluate_soft(mdp, pi_new, tau);

    // <Q_tau^old(s,.), pi_new - pi_old> - tau H^new(s) + tau H^old(s); with the
    // soft-value convention Q = r + gamma E[V] this equals the advantage form
    // <A_tau^old, pi_new> - tau H^new since <A_tau^old, pi_old> = tau H^old.
    Vec integrand(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        double qdiff = 0.0;
        for (std::size_t a = 0; a < A; ++a) qdiff += (pi_new.w(s, a) - pi_old.w(s, a)) * old_vals.q(s, a);
        integrand[s] = qdiff - tau * theory_detail::row_neg_entropy(pi_new.w, s) +
                       tau * theory_detail::row_neg_entropy(pi_old.w, s);
    }

    double worst = 0.0;
    Vec delta(S, 0.0);
    for (std::size_t s = 0; s < S; ++s) delta[s] = new_vals.v[s] - old_vals.v[s];
    for (std::size_t s = 0; s < S; ++s) {
        Vec start(S, 0.0);
        start[s] = 1.0;
        const Vec d = discounted_visitation(mdp, pi_new, start);
        double rhs = 0.0;
        for (std::size_t s2 = 0; s2 < S; ++s2) rhs += d[s2] * integrand[s2];
        rhs /= (1.0 - mdp.gamma);
        worst = std::max(worst, std::abs(delta[s] - rhs));
    }
    return worst;
}

struct OptimalSoftPolicy {
    TabularPolicy pi;
    SoftValues values;
    std::size_t iterations = 0;
    double bellman_residual = 0.0;
};

/// Residual of the value-transformation identity tied to the steady state of
/// the optimal policy:
///   E_{nu*}[<Q_tau^pi(s,.), pi*(.|s) - pi(.|s)> - tau H^{pi*}(s) + tau H^pi(s)]
///     = (1 - gamma) E_{nu*}[V_tau^{pi*}(s) - V_tau^pi(s)],
/// where nu* is the stationary distribution induced by pi*. (The identity
/// needs the true steady state; a discounted visitation in its place leaves a
/// mixing-dependent residual.)
inline double steady_state_identity_residual(const FiniteMdp& mdp, const TabularPolicy& pi,
                                             const TabularPolicy& pi_star, double tau) {
    const std::size_t S = mdp.n_states, A = mdp.n_actions();
    const Vec nu = stationary_distribution(mdp, pi_star);
    const SoftValues vals = evaluate_soft(mdp, pi, tau);
    const SoftValues vals_star = evaluate_soft(mdp, pi_star, tau);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        double qdiff = 0.0;
        for (std::size_t a = 0; a < A; ++a) qdiff += vals.q(s, a) * (pi_star.w(s, a) - pi.w(s, a));
        lhs += nu[s] * (qdiff - tau * theory_detail::row_neg_entropy(pi_star.w, s) +
                        tau * theory_detail::row_neg_entropy(pi.w, s));
        rhs += nu[s] * (1.0 - mdp.gamma) * (vals_star.v[s] - vals.v[s]);
    }
    return std::abs(lhs - rhs);
}

/// Soft value iteration V(s) <- tau * logsumexp(Q(s,.)/tau) to the fixed
/// point; pi* is the softmax of Q*/tau (discrete convention throughout).
inline OptimalSoftPolicy optimal_soft_policy(const FiniteMdp& mdp, double tau, double tol = 1e-10) {
    if (!(tau > 0.0)) throw std::invalid_argument("optimal_soft_policy: tau must be > 0");
    const std::size_t S = mdp.n_states, A = mdp.n_actions();
    Vec v(S, 0.0);
    Mat q(S, A, 0.0);
    const double stop = tol * (1.0 - mdp.gamma) / mdp.gamma;
    const std::size_t cap = 20000000;
    std::size_t it = 0;
    for (; it < cap; ++it) {
        double diff = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < A; ++a) {
                double boot = 0.0;
                for (std::size_t s2 = 0; s2 < S; ++s2) boot += mdp.transitions[s](a, s2) * v[s2];
                q(s, a) = mdp.reward(s, a) + mdp.gamma * boot;
                mx = std::max(mx, q(s, a) / tau);
            }
            double sum = 0.0;
            for (std::size_t a = 0; a < A; ++a) sum += std::exp(q(s, a) / tau - mx);
            const double vnew = tau * (mx + std::log(sum));
            diff = std::max(diff, std::abs(vnew - v[s]));
            v[s] = vnew;
        }
        if (diff < stop) break;
    }
    if (it >= cap) throw std::runtime_error("optimal_soft_policy: did not converge within the iteration cap");

    OptimalSoftPolicy out;
    Mat pw(S, A);
    double residual = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < A; ++a) mx = std::max(mx, q(s, a) / tau);
        double sum = 0.0;
        for (std::size_t a = 0; a < A; ++a) sum += std::exp(q(s, a) / tau - mx);
        for (std::size_t a = 0; a < A; ++a) pw(s, a) = std::exp(q(s, a) / tau - mx) / sum;
        residual = std::max(residual, std::abs(v[s] - tau * (mx + std::log(sum))));
    }
    out.pi = TabularPolicy(mdp.grid, std::move(pw));
    out.values.v = std::move(v);
    out.values.q = std::move(q);
    out.iterations = it;
    out.bellman_residual = residual;
    return out;
}

struct ProxConfig {
    double step_scale = 0.5;          // mirror step = 1.8 * step_scale / tau (relative smoothness)
    std::size_t max_iterations = 50000;
    double stationarity_tol = 1e-6;
};

struct ProxResult {
    GridDistribution q;
    double residual = 0.0;   // achieved stationarity residual
    bool converged = false;
    std::size_t iterations = 0;
    double objective = 0.0;
};

/// argmax_q <Q, q> - tau sum q ln q - (1/2 eta) W2^2(q, pi_k) over the simplex.
///
/// Solved in transport-plan form: maximize over couplings gamma >= 0 with row
/// marginals pi_k, where q is the column marginal and the W2 penalty becomes
/// the linear cost sum_{j,i} gamma_{ji} (a_j - a_i)^2 / (2 eta). Maximizing
/// jointly over the coupling recovers exactly the marginal problem (for fixed
/// q the best coupling is the optimal transport plan), and the objective is
/// smooth and concave in gamma, unlike the marginal form whose W2 term has
/// kinks wherever the optimal plan changes. Entropic mirror ascent runs per
/// source row with step step_scale / max|g|; stationarity is the sup over
/// rows of the within-row gradient spread on the support. The best iterate
/// seen is returned, and the anchor pi_k itself (the identity coupling)
/// participates, so the output objective never falls below the anchor's.
inline ProxResult exact_prox_step(const Vec& qvals, const GridDistribution& pi_k, double tau, double eta,
                                  const ProxConfig& cfg = ProxConfig()) {
    if (!(tau > 0.0) || !(eta > 0.0)) throw std::invalid_argument("exact_prox_step: tau and eta must be > 0");
    if (qvals.size() != pi_k.grid.size()) throw std::invalid_argument("exact_prox_step: Q length mismatch");
    const std::size_t n = qvals.size();
    const Vec& pts = pi_k.grid.points;

    std::vector<std::size_t> rows;  // source atoms with mass
    for (std::size_t j = 0; j < n; ++j)
        if (pi_k.w[j] > 0.0) rows.push_back(j);
    const std::size_t m = rows.size();

    Mat cost(m, n);  // (a_j - a_i)^2 / (2 eta)
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pts[rows[r]] - pts[i];
            cost(r, i) = d * d / (2.0 * eta);
        }

    auto marginal_objective = [&](const Vec& q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += qvals[i] * q[i];
            if (q[i] > 0.0) acc -= tau * q[i] * std::log(q[i]);
        }
        return acc - w2_squared(GridDistribution(pi_k.grid, q), pi_k) / (2.0 * eta);
    };

    ProxResult best;
    best.q = pi_k;
    best.objective = marginal_objective(pi_k.w);
    {
        // residual of the anchor itself: best pairwise-move derivative
        double worst = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const std::size_t j = rows[r];
            const double gj = qvals[j] - tau * (1.0 + std::log(pi_k.w[j]));
            for (std::size_t i = 0; i < n; ++i) {
                const double gi = qvals[i] - tau * (1.0 + std::log(std::max(pi_k.w[i], 1e-300)));
                worst = std::max(worst, gi - gj - cost(r, i));
            }
        }
        best.residual = worst;
    }

    // Row-wise logits of the coupling, started near the identity plan.
    Mat logits(m, n);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t i = 0; i < n; ++i) logits(r, i) = rows[r] == i ? 0.0 : -30.0;

    Mat plan(m, n);
    Vec q(n), g(n);
    for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
        // plan rows from logits, column sums -> q
        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t r = 0; r < m; ++r) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, logits(r, i));
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                plan(r, i) = std::exp(logits(r, i) - mx);
                sum += plan(r, i);
            }
            const double scale = pi_k.w[rows[r]] / sum;
            for (std::size_t i = 0; i < n; ++i) {
                plan(r, i) *= scale;
                q[i] += plan(r, i);
            }
        }
        for (std::size_t i = 0; i < n; ++i) g[i] = qvals[i] - tau * (1.0 + std::log(std::max(q[i], 1e-300)));

        // coupling objective (exact for this iterate's plan); the marginal
        // objective of q can only be higher, so this is a safe lower bound
        // for best-iterate tracking, with the exact value computed on accept
        double plan_cost = 0.0;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t i = 0; i < n; ++i) plan_cost += plan(r, i) * cost(r, i);
        double lin_ent = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lin_ent += qvals[i] * q[i];
            if (q[i] > 0.0) lin_ent -= tau * q[i] * std::log(q[i]);
        }
        const double coupling_objective = lin_ent - plan_cost;

        // stationarity: within-row spread of the row gradient over the support
        double residual = 0.0, gmax = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            double row_mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) row_mean += (g[i] - cost(r, i)) * plan(r, i);
            row_mean /= pi_k.w[rows[r]];
            for (std::size_t i = 0; i < n; ++i) {
                const double gv = g[i] - cost(r, i);
                gmax = std::max(gmax, std::abs(gv));
                if (plan(r, i) > 1e-300) residual = std::max(residual, std::abs(gv - row_mean));
            }
        }

        const bool stationary = residual < cfg.stationarity_tol;
        if (coupling_objective > best.objective || (stationary && marginal_objective(q) >= best.objective)) {
            best.objective = marginal_objective(q);
            best.q = GridDistribution::normalized(pi_k.grid, q);
            best.residual = residual;
            best.iterations = it;
        }
        if (stationary) break;
        const double step = cfg.step_scale / (gmax + 1e-12);
        for (std::size_t r = 0; r < m; ++r) {
            const double lw = std::log(pi_k.w[rows[r]]);
            for (std::size_t i = 0; i < n; ++i) {
                const double lp = std::log(std::max(plan(r, i), 1e-300)) - lw;  // normalized row logit
                logits(r, i) = lp + step * (g[i] - cost(r, i));
            }
        }
    }
    best.converged = best.residual < cfg.stationarity_tol;
    return best;
}

/// Transport by grad-of-Q proximal argmax, then Gaussian smoothing with
/// variance 2 tau eta.
inline GridDistribution split_step(const Vec& qvals, const GridDistribution& pi_k, double tau, double eta) {
    return heat_step(transport_step(pi_k, qvals, eta), 2.0 * tau * eta);
}

enum class ProxMode { Exact, Split };

inline ProxMode prox_mode_from_string(const std::string& s) {
    if (s == "exact") return ProxMode::Exact;
    if (s == "split") return ProxMode::Split;
    throw std::invalid_argument("unknown mode: " + s + " (expected exact or split)");
}

struct IterateRecord {
    std::size_t k = 0;
    double j = 0.0;            // E_{nu*}[V_tau^{pi_k}]
    double d = 0.0;            // E_{nu*}[0.5 W2^2(pi_k, pi*)]
    double min_support = 0.0;  // smallest policy weight across states
    Vec v;                     // per-state soft values of pi_k
    Vec prox_residuals;        // per-state inner residuals (empty in split mode)
};

struct WppgTrajectory {
    std::vector<IterateRecord> records;
    double j_star = 0.0;
    TabularPolicy pi_star;
    TabularPolicy pi_final;
    Vec nu_star;
};

/// Iterate the per-state step (exact prox or splitting) for a fixed number of
/// rounds, recording J and D against the optimal policy. nu* is the
/// discounted visitation of pi* from the MDP's initial distribution.
inline WppgTrajectory wppg_iterate(const FiniteMdp& mdp, const TabularPolicy& pi0, double tau, double eta,
                                   std::size_t steps, ProxMode mode, const ProxConfig& prox_cfg = ProxConfig()) {
    mdp.validate();
    const std::size_t S = mdp.n_states;

    WppgTrajectory out;
    const OptimalSoftPolicy opt = optimal_soft_policy(mdp, tau, 1e-12);
    out.pi_star = opt.pi;
    out.nu_star = discounted_visitation(mdp, opt.pi, mdp.rho);
    out.j_star = dot(out.nu_star, opt.values.v);

    TabularPolicy pi = pi0;
    for (std::size_t k = 0;; ++k) {
        const SoftValues vals = evaluate_soft(mdp, pi, tau);
        IterateRecord rec;
        rec.k = k;
        rec.j = dot(out.nu_star, vals.v);
        rec.v = vals.v;
        double dsum = 0.0;
        double min_support = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < S; ++s) {
            dsum += out.nu_star[s] * half_cost(pi.row(s), opt.pi.row(s));
            for (std::size_t a = 0; a < mdp.n_actions(); ++a) min_support = std::min(min_support, pi.w(s, a));
        }
        rec.d = dsum;
        rec.min_support = min_support;

        if (k == steps) {
            out.records.push_back(rec);
            break;
        }

        TabularPolicy next = pi;
        for (std::size_t s = 0; s < S; ++s) {
            const Vec q_row(vals.q.row(s), vals.q.row(s) + mdp.n_actions());
            if (mode == ProxMode::Exact) {
                const ProxResult pr = exact_prox_step(q_row, pi.row(s), tau, eta, prox_cfg);
                rec.prox_residuals.push_back(pr.residual);
                next.set_row(s, pr.q);
            } else {
                next.set_row(s, split_step(q_row, pi.row(s), tau, eta));
            }
        }
        out.records.push_back(rec);
        pi = next;
    }
    out.pi_final = pi;
    return out;
}

struct ContractionFit {
    double lambda_hat = 0.0;
    double ratio = 0.0;  // exp(slope) of the log-linear fit of e_k
    double r_squared = 0.0;
};

/// Fit e_k = (J* - J_k) + lambda tau D_k to a geometric decay, scanning
/// lambda over a log grid and keeping the most log-linear fit.
inline ContractionFit fit_contraction(const WppgTrajectory& traj, double tau) {
    ContractionFit best;
    best.r_squared = -1.0;
    const std::size_t n = traj.records.size();
    if (n < 3) throw std::invalid_argument("fit_contraction: need at least 3 records");

    for (int e = -30; e <= 30; ++e) {
        const double lambda = std::pow(10.0, 0.1 * static_cast<double>(e));
        Vec logs;
        logs.reserve(n);
        bool ok = true;
        for (const auto& r : traj.records) {
            const double val = (traj.j_star - r.j) + lambda * tau * r.d;
            if (!(val > 1e-13)) {
                ok = logs.size() >= 3;  // allow a converged tail, require a usable prefix
                break;
            }
            logs.push_back(std::log(val));
        }
        if (!ok || logs.size() < 3) continue;
        const double m = static_cast<double>(logs.size());
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (std::size_t k = 0; k < logs.size(); ++k) {
            const double x = static_cast<double>(k);
            sx += x;
            sy += logs[k];
            sxx += x * x;
            sxy += x * logs[k];
            syy += logs[k] * logs[k];
        }
        const double denom = m * sxx - sx * sx;
        if (denom <= 0.0) continue;
        const double slope = (m * sxy - sx * sy) / denom;
        const double ss_tot = syy - sy * sy / m;
        const double intercept = (sy - slope * sx) / m;
        double ss_res = 0.0;
        for (std::size_t k = 0; k < logs.size(); ++k) {
            const double pred = intercept + slope * static_cast<double>(k);
            ss_res += (logs[k] - pred) * (logs[k] - pred);
        }
        const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
        if (r2 > best.r_squared) {
            best.r_squared = r2;
            best.lambda_hat = lambda;
            best.ratio = std::exp(slope);
        }
    }
    if (best.r_squared < 0.0) throw std::runtime_error("fit_contraction: no usable lambda found");
    return best;
}

// ---- MDP builders ----

/// Fixed 3-state, 21-action MDP on [-1, 1]: smooth per-state rewards with
/// distinct maximizers and softmax transition rows that vary with the action.
inline FiniteMdp builtin3_mdp() {
    FiniteMdp mdp;
    mdp.n_states = 3;
    mdp.grid = ActionGrid::uniform(21, -1.0, 1.0);
    mdp.gamma = 0.9;
    mdp.rho = Vec(3, 1.0 / 3.0);
    mdp.reward = Mat(3, 21);
    mdp.transitions.assign(3, Mat(21, 3));

    const double theta[3][3] = {{0.5, -0.3, 0.0}, {0.2, 0.4, -0.2}, {-0.4, 0.1, 0.3}};
    const double beta[3][3] = {{0.3, 0.0, -0.3}, {-0.2, 0.5, 0.0}, {0.1, -0.1, 0.4}};
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 21; ++a) {
            const double x = mdp.grid.points[a];
            switch (s) {
                case 0: mdp.reward(s, a) = 1.0 - (x - 0.5) * (x - 0.5); break;
                case 1: mdp.reward(s, a) = 0.8 * std::cos(2.5 * x); break;
                default: mdp.reward(s, a) = 0.5 - (x + 0.6) * (x + 0.6) + 0.3 * x; break;
            }
            double z[3], mx = -1e300;
            for (std::size_t s2 = 0; s2 < 3; ++s2) {
                z[s2] = theta[s][s2] * x + beta[s][s2];
                mx = std::max(mx, z[s2]);
            }
            double sum = 0.0;
            for (double& v : z) {
                v = std::exp(v - mx);
                sum += v;
            }
            for (std::size_t s2 = 0; s2 < 3; ++s2) mdp.transitions[s](a, s2) = z[s2] / sum;
        }
    mdp.validate();
    return mdp;
}

/// Random ergodic MDP: Dirichlet(1) transition rows, rewards uniform in
/// [-1, 1], uniform initial distribution.
inline FiniteMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng) {
    FiniteMdp mdp;
    mdp.n_states = n_states;
    mdp.grid = ActionGrid::uniform(n_actions, -1.0, 1.0);
    mdp.gamma = gamma;
    mdp.rho = Vec(n_states, 1.0 / static_cast<double>(n_states));
    mdp.reward = Mat(n_states, n_actions);
    for (double& v : mdp.reward.data) v = rng.uniform(-1.0, 1.0);
    mdp.transitions.assign(n_states, Mat(n_actions, n_states));
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < n_states; ++s2) {
                const double e = -std::log(std::max(rng.uniform(), 1e-300));
                mdp.transitions[s](a, s2) = e;
                sum += e;
            }
            for (std::size_t s2 = 0; s2 < n_states; ++s2) mdp.transitions[s](a, s2) /= sum;
        }
    mdp.validate();
    return mdp;
}

/// Random full-support policy with Dirichlet(1) rows.
inline TabularPolicy random_policy(const FiniteMdp& mdp, Rng& rng) {
    Mat w(mdp.n_states, mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        double sum = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double e = -std::log(std::max(rng.uniform(), 1e-300));
            w(s, a) = e;
            sum += e;
        }
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) w(s, a) /= sum;
    }
    return TabularPolicy(mdp.grid, std::move(w));
}

}  // namespace wppg
