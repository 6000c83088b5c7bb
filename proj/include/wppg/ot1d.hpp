#pragma once

// Exact discrete optimal transport between distributions on a shared 1-D
// action grid: squared 2-Wasserstein distance via the monotone coupling,
// Kantorovich dual potentials, KL, discrete entropy, and the transport/heat
// steps of the operator splitting.
//
// Cost conventions, to keep the classic factor-2 bug out: the dual machinery
// works with c(a,b) = 0.5 (a-b)^2 ("half cost"); w2_squared() reports the
// unhalved metric, i.e. exactly 2 * half_cost().

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "wppg/numeric.hpp"

namespace wppg {

struct ActionGrid {
    Vec points;
    double spacing = 0.0;

    ActionGrid() = default;
    explicit ActionGrid(Vec pts) : points(std::move(pts)) {
        if (points.size() < 2) throw std::invalid_argument("ActionGrid: need at least 2 points");
        spacing = points[1] - points[0];
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            const double d = points[i + 1] - points[i];
            if (!(d > 0.0)) throw std::invalid_argument("ActionGrid: points must be strictly increasing");
            if (std::abs(d - spacing) > 1e-12) throw std::invalid_argument("ActionGrid: spacing must be uniform");
        }
    }

    static ActionGrid uniform(std::size_t n, double lo, double hi) {
        if (n < 2 || !(lo < hi)) throw std::invalid_argument("ActionGrid::uniform: bad arguments");
        Vec pts(n);
        for (std::size_t i = 0; i < n; ++i)
            pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        return ActionGrid(std::move(pts));
    }

    std::size_t size() const { return points.size(); }

    bool operator==(const ActionGrid& o) const { return points == o.points; }
};

struct GridDistribution {
    ActionGrid grid;
    Vec w;

    GridDistribution() = default;
    GridDistribution(ActionGrid g, Vec weights) : grid(std::move(g)), w(std::move(weights)) {
        if (w.size() != grid.size()) throw std::invalid_argument("GridDistribution: weight length mismatch");
        double sum = 0.0;
        for (double v : w) {
            if (v < 0.0) throw std::invalid_argument("GridDistribution: negative weight");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("GridDistribution: weights must sum to 1");
    }

    /// Scale nonnegative weights to sum exactly 1.
    static GridDistribution normalized(ActionGrid g, Vec weights) {
        double sum = 0.0;
        for (double v : weights) {
            if (v < 0.0) throw std::invalid_argument("GridDistribution: negative weight");
            sum += v;
        }
        if (!(sum > 0.0)) throw std::invalid_argument("GridDistribution: zero total mass");
        for (double& v : weights) v /= sum;
        return GridDistribution(std::move(g), std::move(weights));
    }

    static GridDistribution dirac(ActionGrid g, std::size_t atom) {
        Vec weights(g.size(), 0.0);
        weights.at(atom) = 1.0;
        return GridDistribution(std::move(g), std::move(weights));
    }

    static GridDistribution uniform(ActionGrid g) {
        const std::size_t n = g.size();
        return GridDistribution(std::move(g), Vec(n, 1.0 / static_cast<double>(n)));
    }
};

namespace ot_detail {

inline void require_same_grid(const GridDistribution& p, const GridDistribution& q) {
    if (!(p.grid == q.grid)) throw std::invalid_argument("ot1d: distributions live on different grids");
}

inline double half_cost_points(double a, double b) {
    const double d = a - b;
    return 0.5 * d * d;
}

struct CouplingEntry {
    std::size_t i;  // atom of p
    std::size_t j;  // atom of q
    double mass;
};

/// Monotone (north-west) coupling of the sorted atoms. Returns the optimal
/// half cost; the pair list is emitted in sweep order.
inline double monotone_coupling(const GridDistribution& p, const GridDistribution& q,
                                std::vector<CouplingEntry>* pairs) {
    constexpr double kExhausted = 1e-15;
    std::vector<std::size_t> sp, sq;
    for (std::size_t i = 0; i < p.w.size(); ++i)
        if (p.w[i] > 0.0) sp.push_back(i);
    for (std::size_t j = 0; j < q.w.size(); ++j)
        if (q.w[j] > 0.0) sq.push_back(j);
    if (sp.empty() || sq.empty()) throw std::invalid_argument("ot1d: empty support");

    if (pairs) pairs->clear();
    double cost = 0.0;
    std::size_t a = 0, b = 0;
    double rp = p.w[sp[0]], rq = q.w[sq[0]];
    while (true) {
        const double m = std::min(rp, rq);
        if (pairs) pairs->push_back({sp[a], sq[b], m});
        cost += m * half_cost_points(p.grid.points[sp[a]], q.grid.points[sq[b]]);
        rp -= m;
        rq -= m;
        const bool pe = rp <= kExhausted, qe = rq <= kExhausted;
        if (pe && qe) {
            ++a;
            ++b;
            if (a >= sp.size() || b >= sq.size()) break;
            rp = p.w[sp[a]];
            rq = q.w[sq[b]];
        } else if (pe) {
            ++a;
            if (a >= sp.size()) break;
            rp = p.w[sp[a]];
        } else if (qe) {
            ++b;
            if (b >= sq.size()) break;
            rq = q.w[sq[b]];
        }
    }
    return cost;
}

}  // namespace ot_detail

/// Optimal transport cost for c(a,b) = 0.5 (a-b)^2.
inline double half_cost(const GridDistribution& p, const GridDistribution& q) {
    ot_detail::require_same_grid(p, q);
    return ot_detail::monotone_coupling(p, q, nullptr);
}

/// Squared 2-Wasserstein distance (unhalved convention): 2 * half_cost.
inline double w2_squared(const GridDistribution& p, const GridDistribution& q) {
    return 2.0 * half_cost(p, q);
}

inline double w2(const GridDistribution& p, const GridDistribution& q) {
    return std::sqrt(std::max(0.0, w2_squared(p, q)));
}

/// Dual potentials (phi, psi) for the half cost: feasible on every grid pair
/// and attaining <phi,p> + <psi,q> = half_cost(p,q).
struct PotentialPair {
    Vec phi;
    Vec psi;
    double half_cost = 0.0;
};

/// Construction: tight propagation of phi_i + psi_j = c_ij along the monotone
/// coupling in sweep order (the first support atom anchors phi = 0; at a
/// clean break the chain is tied through the cross pair, which is the
/// degenerate basic arc of the north-west staircase), then c-transform
/// extension to zero-mass atoms, then a constant shift on phi so attainment
/// holds to machine precision.
inline PotentialPair potentials(const GridDistribution& p, const GridDistribution& q) {
    ot_detail::require_same_grid(p, q);
    std::vector<ot_detail::CouplingEntry> pairs;
    PotentialPair out;
    out.half_cost = ot_detail::monotone_coupling(p, q, &pairs);

    const Vec& pts = p.grid.points;
    const std::size_t n = pts.size();
    constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
    out.phi.assign(n, kUnset);
    out.psi.assign(n, kUnset);

    auto cost = [&pts](std::size_t i, std::size_t j) { return ot_detail::half_cost_points(pts[i], pts[j]); };

    std::size_t prev_j = pairs.front().j;
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        const std::size_t i = pairs[t].i, j = pairs[t].j;
        const bool have_phi = !std::isnan(out.phi[i]);
        const bool have_psi = !std::isnan(out.psi[j]);
        if (t == 0) {
            out.phi[i] = 0.0;
            out.psi[j] = cost(i, j);
        } else if (have_phi && !have_psi) {
            out.psi[j] = cost(i, j) - out.phi[i];
        } else if (!have_phi && have_psi) {
            out.phi[i] = cost(i, j) - out.psi[j];
        } else if (!have_phi && !have_psi) {
            out.phi[i] = cost(i, prev_j) - out.psi[prev_j];
            out.psi[j] = cost(i, j) - out.phi[i];
        }
        prev_j = j;
    }

    // c-transform onto zero-mass atoms: psi from the p-support, then phi from
    // the full psi. Support values stay put.
    for (std::size_t j = 0; j < n; ++j) {
        if (!std::isnan(out.psi[j])) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i)
            if (p.w[i] > 0.0) best = std::min(best, cost(i, j) - out.phi[i]);
        out.psi[j] = best;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isnan(out.phi[i])) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) best = std::min(best, cost(i, j) - out.psi[j]);
        out.phi[i] = best;
    }

    double attained = 0.0;
    for (std::size_t i = 0; i < n; ++i) attained += out.phi[i] * p.w[i] + out.psi[i] * q.w[i];
    const double shift = out.half_cost - attained;  // floating-point cleanup
    for (double& v : out.phi) v += shift;
    return out;
}

/// residual = 0.5 W2^2(r,q) - 0.5 W2^2(p,q) - <phi^{p->q}, r - p>; the
/// supporting-hyperplane property makes it >= 0 up to rounding.
inline double supporting_hyperplane_residual(const GridDistribution& p, const GridDistribution& q,
                                             const GridDistribution& r) {
    ot_detail::require_same_grid(p, q);
    ot_detail::require_same_grid(p, r);
    const PotentialPair pot = potentials(p, q);
    double lin = 0.0;
    for (std::size_t i = 0; i < pot.phi.size(); ++i) lin += pot.phi[i] * (r.w[i] - p.w[i]);
    return half_cost(r, q) - pot.half_cost - lin;
}

/// sum_i p_i ln p_i (the negative entropy, in nats); 0 ln 0 = 0.
inline double negative_entropy(const GridDistribution& p) {
    double acc = 0.0;
    for (double v : p.w)
        if (v > 0.0) acc += v * std::log(v);
    return acc;
}

/// KL(p || q); +infinity when supp(p) is not contained in supp(q).
inline double kl(const GridDistribution& p, const GridDistribution& q) {
    ot_detail::require_same_grid(p, q);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.w.size(); ++i) {
        if (p.w[i] == 0.0) continue;
        if (q.w[i] == 0.0) return std::numeric_limits<double>::infinity();
        acc += p.w[i] * std::log(p.w[i] / q.w[i]);
    }
    return acc;
}

/// Gaussian convolution sampled on the grid offsets, with the kernel of each
/// source atom truncated at the grid boundary and renormalized (so mass is
/// preserved exactly and no weight ever turns negative).
inline GridDistribution heat_step(const GridDistribution& p, double variance) {
    if (variance < 0.0) throw std::invalid_argument("heat_step: variance must be >= 0");
    if (variance == 0.0) return p;
    const std::size_t n = p.grid.size();
    const Vec& pts = p.grid.points;
    Vec out(n, 0.0);
    Vec kernel(n);
    for (std::size_t j = 0; j < n; ++j) {
        if (p.w[j] == 0.0) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pts[i] - pts[j];
            kernel[i] = std::exp(-d * d / (2.0 * variance));
            sum += kernel[i];
        }
        const double scale = p.w[j] / sum;
        for (std::size_t i = 0; i < n; ++i) out[i] += scale * kernel[i];
    }
    double total = 0.0;
    for (double v : out) total += v;
    for (double& v : out) v /= total;
    return GridDistribution(p.grid, std::move(out));
}

/// Each atom b with mass p(b) relocates to argmax_a { Q(a) - (a-b)^2/(2 eta) }
/// over the grid (ties to the smallest index); masses accumulate at the
/// destinations, so total mass is preserved exactly.
inline GridDistribution transport_step(const GridDistribution& p, const Vec& qvals, double eta) {
    if (qvals.size() != p.grid.size()) throw std::invalid_argument("transport_step: Q length mismatch");
    if (!(eta > 0.0)) throw std::invalid_argument("transport_step: eta must be > 0");
    for (double v : qvals)
        if (!std::isfinite(v)) throw std::invalid_argument("transport_step: non-finite Q");
    const std::size_t n = p.grid.size();
    const Vec& pts = p.grid.points;
    Vec out(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (p.w[j] == 0.0) continue;
        std::size_t best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pts[i] - pts[j];
            const double val = qvals[i] - d * d / (2.0 * eta);
            if (val > best_val) {
                best_val = val;
                best = i;
            }
        }
        out[best] += p.w[j];
    }
    return GridDistribution(p.grid, std::move(out));
}

}  // namespace wppg
