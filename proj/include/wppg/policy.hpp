#pragma once

// The two actor families: a Tanh-Gaussian explicit policy and a
// noise-conditioned implicit policy, sharing the affine-tanh squash onto the
// action box. Sampling returns the noise so a later reforward can reuse it.

#include <stdexcept>
#include <vector>

#include "wppg/nn.hpp"
#include "wppg/numeric.hpp"

namespace wppg {

struct ActionBox {
    Vec lo;
    Vec hi;

    ActionBox() = default;
    ActionBox(Vec a_min, Vec a_max) : lo(std::move(a_min)), hi(std::move(a_max)) {
        if (lo.size() != hi.size()) throw std::invalid_argument("ActionBox: bound length mismatch");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw std::invalid_argument("ActionBox: need a_min < a_max componentwise");
    }
    static ActionBox symmetric(std::size_t dim, double half_width) {
        return ActionBox(Vec(dim, -half_width), Vec(dim, half_width));
    }
    std::size_t dim() const { return lo.size(); }

    Vec clamp(Vec a) const {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::min(std::max(a[i], lo[i]), hi[i]);
        return a;
    }
};

/// ((hi-lo)/2) * tanh(u) + (hi+lo)/2, componentwise.
inline Vec squash(const Vec& u, const ActionBox& box) {
    if (u.size() != box.dim()) throw std::invalid_argument("squash: width mismatch");
    Vec a(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
        a[i] = 0.5 * (box.hi[i] - box.lo[i]) * std::tanh(u[i]) + 0.5 * (box.hi[i] + box.lo[i]);
    return a;
}

/// Diagonal of d squash / d u at u.
inline Vec squash_jacobian(const Vec& u, const ActionBox& box) {
    Vec j(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double t = std::tanh(u[i]);
        j[i] = 0.5 * (box.hi[i] - box.lo[i]) * (1.0 - t * t);
    }
    return j;
}

constexpr double kLogStdMin = -10.0;
constexpr double kLogStdMax = 4.0;

/// Tanh-Gaussian policy: the net maps s to (mu, log sigma), actions are
/// squash(mu + sigma * eps) with eps ~ N(0, I).
class ExplicitActor {
public:
    ExplicitActor() = default;
    ExplicitActor(MlpNet net, ActionBox box) : net_(std::move(net)), box_(std::move(box)) {
        if (net_.output_width() != 2 * box_.dim())
            throw std::invalid_argument("ExplicitActor: net output must be 2 * action_dim");
    }

    std::size_t state_dim() const { return net_.input_width(); }
    std::size_t action_dim() const { return box_.dim(); }
    std::size_t noise_dim() const { return box_.dim(); }
    const ActionBox& box() const { return box_; }
    MlpNet& net() { return net_; }
    const MlpNet& net() const { return net_; }

    struct Sample {
        Vec action;
        Vec pre_squash;
        Vec noise;  // eps
    };

    Sample sample(const Vec& s, Rng& rng) {
        Sample out;
        out.noise = gaussian(rng, action_dim());
        out.action = forward_with_noise(s, out.noise, &out.pre_squash);
        return out;
    }

    /// Deterministic action for the given eps (the reforward path).
    Vec forward_with_noise(const Vec& s, const Vec& eps, Vec* pre_squash = nullptr) const {
        if (eps.size() != action_dim()) throw std::invalid_argument("forward_with_noise: noise width mismatch");
        const Mat x(1, s.size(), s);
        const Mat head = net_.forward_batch(x);
        Vec u(action_dim());
        for (std::size_t i = 0; i < action_dim(); ++i) {
            const double mu = head(0, i);
            const double log_std = std::clamp(head(0, action_dim() + i), kLogStdMin, kLogStdMax);
            u[i] = mu + std::exp(log_std) * eps[i];
        }
        if (pre_squash) *pre_squash = u;
        return squash(u, box_);
    }

    /// Batched actions for rows of S with per-row eps.
    Mat forward_with_noise_batch(const Mat& s, const Mat& eps, MlpNet::BatchCache* cache = nullptr,
                                 Mat* pre_squash = nullptr) const {
        const Mat head = net_.forward_batch(s, cache);
        const std::size_t a = action_dim();
        Mat out(s.rows, a);
        Mat u(s.rows, a);
        for (std::size_t i = 0; i < s.rows; ++i) {
            const double* hrow = head.row(i);
            const double* erow = eps.row(i);
            double* urow = u.row(i);
            double* orow = out.row(i);
            for (std::size_t j = 0; j < a; ++j) {
                const double log_std = std::clamp(hrow[a + j], kLogStdMin, kLogStdMax);
                const double uv = hrow[j] + std::exp(log_std) * erow[j];
                urow[j] = uv;
                orow[j] = 0.5 * (box_.hi[j] - box_.lo[j]) * std::tanh(uv) + 0.5 * (box_.hi[j] + box_.lo[j]);
            }
        }
        if (pre_squash) *pre_squash = std::move(u);
        return out;
    }

    /// Sum-over-rows parameter gradient of upstream . action, reusing the
    /// forward cache produced by forward_with_noise_batch.
    Vec grad_params_batch(const MlpNet::BatchCache& cache, const Mat& eps, const Mat& pre_squash,
                          const Mat& upstream_action) const {
        const std::size_t a = action_dim();
        const Mat& head = cache.acts.back();
        Mat up_head(upstream_action.rows, 2 * a, 0.0);
        for (std::size_t i = 0; i < upstream_action.rows; ++i)
            for (std::size_t j = 0; j < a; ++j) {
                const double t = std::tanh(pre_squash(i, j));
                const double du = upstream_action(i, j) * 0.5 * (box_.hi[j] - box_.lo[j]) * (1.0 - t * t);
                up_head(i, j) = du;  // d u / d mu = 1
                const double raw = head(i, a + j);
                if (raw > kLogStdMin && raw < kLogStdMax)
                    up_head(i, a + j) = du * std::exp(raw) * eps(i, j);  // d u / d log_std = sigma * eps
            }
        Vec g;
        net_.backward_batch(cache, up_head, &g, nullptr);
        return g;
    }

    /// d(upstream . action)/d s for one state (finite-difference checked).
    Vec grad_state(const Vec& s, const Vec& eps, const Vec& upstream_action) const {
        MlpNet::BatchCache cache;
        Mat pre;
        const Mat e(1, eps.size(), eps);
        forward_with_noise_batch(Mat(1, s.size(), s), e, &cache, &pre);
        const std::size_t a = action_dim();
        const Mat& head = cache.acts.back();
        Mat up_head(1, 2 * a, 0.0);
        for (std::size_t j = 0; j < a; ++j) {
            const double t = std::tanh(pre(0, j));
            const double du = upstream_action[j] * 0.5 * (box_.hi[j] - box_.lo[j]) * (1.0 - t * t);
            up_head(0, j) = du;
            const double raw = head(0, a + j);
            if (raw > kLogStdMin && raw < kLogStdMax) up_head(0, a + j) = du * std::exp(raw) * eps[j];
        }
        Mat dx;
        net_.backward_batch(cache, up_head, nullptr, &dx);
        return Vec(dx.row(0), dx.row(0) + dx.cols);
    }

private:
    MlpNet net_;
    ActionBox box_;
};

/// Pushforward policy: a = squash(f([s, z])) with z ~ N(0, I_M). No density.
class ImplicitActor {
public:
    ImplicitActor() = default;
    ImplicitActor(MlpNet net, std::size_t latent_dim, ActionBox box)
        : net_(std::move(net)), latent_dim_(latent_dim), box_(std::move(box)) {
        if (net_.output_width() != box_.dim())
            throw std::invalid_argument("ImplicitActor: net output must be action_dim");
        if (net_.input_width() <= latent_dim_ && latent_dim_ > 0)
            throw std::invalid_argument("ImplicitActor: net input must be state_dim + latent_dim");
    }

    std::size_t state_dim() const { return net_.input_width() - latent_dim_; }
    std::size_t action_dim() const { return box_.dim(); }
    std::size_t noise_dim() const { return latent_dim_; }
    const ActionBox& box() const { return box_; }
    MlpNet& net() { return net_; }
    const MlpNet& net() const { return net_; }

    struct Sample {
        Vec action;
        Vec noise;  // z
    };

    Sample sample(const Vec& s, Rng& rng) {
        Sample out;
        out.noise.resize(latent_dim_);
        for (double& z : out.noise) z = rng.gaussian();
        out.action = forward_with_noise(s, out.noise);
        return out;
    }

    Vec forward_with_noise(const Vec& s, const Vec& z, Vec* pre_squash = nullptr) const {
        if (s.size() != state_dim()) throw std::invalid_argument("forward_with_noise: state width mismatch");
        if (z.size() != latent_dim_) throw std::invalid_argument("forward_with_noise: latent width mismatch");
        Vec x = s;
        x.insert(x.end(), z.begin(), z.end());
        const Mat u = net_.forward_batch(Mat(1, x.size(), x));
        Vec uv(u.row(0), u.row(0) + u.cols);
        if (pre_squash) *pre_squash = uv;
        return squash(uv, box_);
    }

    /// Rows of s paired with rows of z; concatenation happens here.
    Mat forward_with_noise_batch(const Mat& s, const Mat& z, MlpNet::BatchCache* cache = nullptr,
                                 Mat* pre_squash = nullptr) const {
        if (z.cols != latent_dim_ || z.rows != s.rows)
            throw std::invalid_argument("forward_with_noise_batch: latent shape mismatch");
        Mat x(s.rows, s.cols + latent_dim_);
        for (std::size_t i = 0; i < s.rows; ++i) {
            std::memcpy(x.row(i), s.row(i), s.cols * sizeof(double));
            std::memcpy(x.row(i) + s.cols, z.row(i), latent_dim_ * sizeof(double));
        }
        Mat u = net_.forward_batch(x, cache);
        Mat out(u.rows, u.cols);
        for (std::size_t i = 0; i < u.rows; ++i) {
            const double* urow = u.row(i);
            double* orow = out.row(i);
            for (std::size_t j = 0; j < u.cols; ++j)
                orow[j] = 0.5 * (box_.hi[j] - box_.lo[j]) * std::tanh(urow[j]) + 0.5 * (box_.hi[j] + box_.lo[j]);
        }
        if (pre_squash) *pre_squash = std::move(u);
        return out;
    }

    Vec grad_params_batch(const MlpNet::BatchCache& cache, const Mat& pre_squash, const Mat& upstream_action) const {
        Mat up_u(upstream_action.rows, upstream_action.cols);
        for (std::size_t i = 0; i < upstream_action.rows; ++i)
            for (std::size_t j = 0; j < upstream_action.cols; ++j) {
                const double t = std::tanh(pre_squash(i, j));
                up_u(i, j) = upstream_action(i, j) * 0.5 * (box_.hi[j] - box_.lo[j]) * (1.0 - t * t);
            }
        Vec g;
        net_.backward_batch(cache, up_u, &g, nullptr);
        return g;
    }

    Vec grad_state(const Vec& s, const Vec& z, const Vec& upstream_action) const {
        MlpNet::BatchCache cache;
        Mat pre;
        forward_with_noise_batch(Mat(1, s.size(), s), Mat(1, z.size(), z), &cache, &pre);
        Mat up_u(1, upstream_action.size());
        for (std::size_t j = 0; j < upstream_action.size(); ++j) {
            const double t = std::tanh(pre(0, j));
            up_u(0, j) = upstream_action[j] * 0.5 * (box_.hi[j] - box_.lo[j]) * (1.0 - t * t);
        }
        Mat dx;
        net_.backward_batch(cache, up_u, nullptr, &dx);
        return Vec(dx.row(0), dx.row(0) + s.size());  // state part of [s, z]
    }

private:
    MlpNet net_;
    std::size_t latent_dim_ = 0;
    ActionBox box_;
};

/// Action difference under identical noise, before/after a parameter change.
template <class Actor>
Vec reforward_delta(const Actor& actor, const Vec& s, const Vec& noise, const Vec& action_before) {
    Vec after = actor.forward_with_noise(s, noise);
    for (std::size_t i = 0; i < after.size(); ++i) after[i] -= action_before[i];
    return after;
}

}  // namespace wppg
