#pragma once

// Off-policy training loops for the explicit (tanh-Gaussian) and implicit
// (noise-conditioned) actors: replay with entropy-regularized rewards, twin
// critics with K-sample bootstrapped 1-step TD targets, and the noisy
// direction-matching actor step.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "wppg/entropy.hpp"
#include "wppg/envs.hpp"
#include "wppg/nn.hpp"
#include "wppg/numeric.hpp"
#include "wppg/policy.hpp"
#include "wppg/replay.hpp"

namespace wppg {

enum class Algo { Wppg = 0, WppgI = 1 };

inline Algo algo_from_string(const std::string& s) {
    if (s == "wppg") return Algo::Wppg;
    if (s == "wppg-i") return Algo::WppgI;
    throw std::invalid_argument("unknown algo: " + s + " (expected wppg or wppg-i)");
}

struct TrainConfig {
    double tau = 1e-4;                  // entropy scale
    double eta = 0.1;                   // Wasserstein step size
    std::size_t action_samples = 32;    // K
    double gamma = 0.99;
    double polyak_sigma = 0.005;
    double lr_actor = 3e-4;
    double lr_critic = 3e-4;
    std::size_t batch_size = 256;
    std::size_t buffer_capacity = 1000000;
    std::size_t learning_starts = 10000;
    std::size_t total_steps = 100000;
    std::size_t eval_interval = 2000;
    std::size_t eval_episodes = 10;
    double sigma_ent = 0.1;
    std::size_t mixture_samples = 32;   // M
    std::size_t baseline_samples = 32;  // L
    long latent_dim = -1;               // -1: ceil(state_dim / 3)
    std::vector<std::size_t> hidden = {16, 16};
    Activation activation = Activation::Relu;

    void validate() const {
        if (tau < 0.0) throw std::invalid_argument("TrainConfig: tau must be >= 0");
        if (!(eta > 0.0)) throw std::invalid_argument("TrainConfig: eta must be > 0");
        if (action_samples < 1) throw std::invalid_argument("TrainConfig: action_samples must be >= 1");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TrainConfig: gamma must be in (0,1)");
        if (polyak_sigma < 0.0 || polyak_sigma > 1.0)
            throw std::invalid_argument("TrainConfig: polyak_sigma must be in [0,1]");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (buffer_capacity < batch_size) throw std::invalid_argument("TrainConfig: buffer smaller than batch");
        if (!(sigma_ent > 0.0)) throw std::invalid_argument("TrainConfig: sigma_ent must be > 0");
    }

    std::size_t resolve_latent_dim(std::size_t state_dim) const {
        if (latent_dim >= 0) return static_cast<std::size_t>(latent_dim);
        return (state_dim + 2) / 3;
    }
};

struct CriticPair {
    MlpNet q1, q2;
    MlpNet target_q1, target_q2;

    static CriticPair make(std::size_t state_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden,
                           Activation act, Rng& rng) {
        std::vector<std::size_t> widths;
        widths.push_back(state_dim + action_dim);
        widths.insert(widths.end(), hidden.begin(), hidden.end());
        widths.push_back(1);
        CriticPair c{MlpNet(widths, act), MlpNet(widths, act), MlpNet(), MlpNet()};
        Rng r1 = rng.split("q1"), r2 = rng.split("q2");
        c.q1.init_params(r1);
        c.q2.init_params(r2);
        c.target_q1 = c.q1;
        c.target_q2 = c.q2;
        return c;
    }
};

/// Batched min(Q1,Q2) with the action-gradient of whichever critic attains
/// the minimum (ties resolved toward Q1).
class ActionValueFn {
public:
    virtual ~ActionValueFn() = default;
    virtual void min_q_grad(const Mat& s, const Mat& a, Vec* q_out, Mat* dq_da_out) const = 0;
};

namespace detail {

inline Mat hcat(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw std::invalid_argument("hcat: row mismatch");
    Mat out(a.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        std::memcpy(out.row(i), a.row(i), a.cols * sizeof(double));
        std::memcpy(out.row(i) + a.cols, b.row(i), b.cols * sizeof(double));
    }
    return out;
}

inline MlpNet::BatchCache gather_cache(const MlpNet::BatchCache& c, const std::vector<std::size_t>& idx) {
    MlpNet::BatchCache out;
    out.acts.reserve(c.acts.size());
    for (const Mat& m : c.acts) out.acts.push_back(gather_rows(m, idx));
    return out;
}

}  // namespace detail

class TwinCriticView final : public ActionValueFn {
public:
    TwinCriticView(const MlpNet& q1, const MlpNet& q2) : q1_(q1), q2_(q2) {}

    void min_q_grad(const Mat& s, const Mat& a, Vec* q_out, Mat* dq_da_out) const override {
        const Mat x = detail::hcat(s, a);
        MlpNet::BatchCache c1, c2;
        const Mat v1 = q1_.forward_batch(x, dq_da_out ? &c1 : nullptr);
        const Mat v2 = q2_.forward_batch(x, dq_da_out ? &c2 : nullptr);
        const std::size_t n = x.rows;
        if (q_out) q_out->resize(n);
        std::vector<std::size_t> idx1, idx2;
        idx1.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const bool first = v1(i, 0) <= v2(i, 0);
            if (q_out) (*q_out)[i] = first ? v1(i, 0) : v2(i, 0);
            (first ? idx1 : idx2).push_back(i);
        }
        if (!dq_da_out) return;
        *dq_da_out = Mat(n, a.cols);
        scatter_input_grads(q1_, c1, idx1, s.cols, *dq_da_out);
        scatter_input_grads(q2_, c2, idx2, s.cols, *dq_da_out);
    }

private:
    static void scatter_input_grads(const MlpNet& net, const MlpNet::BatchCache& cache,
                                    const std::vector<std::size_t>& idx, std::size_t state_dim, Mat& dq_da) {
        if (idx.empty()) return;
        const MlpNet::BatchCache sub = detail::gather_cache(cache, idx);
        Mat up(idx.size(), 1, Vec(idx.size(), 1.0));
        Mat dx;
        net.backward_batch(sub, up, nullptr, &dx);
        for (std::size_t t = 0; t < idx.size(); ++t)
            std::memcpy(dq_da.row(idx[t]), dx.row(t) + state_dim, dq_da.cols * sizeof(double));
    }

    const MlpNet& q1_;
    const MlpNet& q2_;
};

/// y_i = r_i + gamma (1 - d_i) (1/K) sum_k min(Qbar1, Qbar2)(s'_i, a'_ik) with
/// a' drawn from the target actor. Takes the rng by value so a call is
/// reproducible from the same stream state.
template <class Actor>
Vec td_targets(const Batch& batch, const CriticPair& critics, const Actor& target_actor, const TrainConfig& cfg,
               Rng rng) {
    const std::size_t b = batch.size();
    if (b == 0) throw std::invalid_argument("td_targets: empty batch");
    const std::size_t k = cfg.action_samples;
    const std::size_t nd = target_actor.noise_dim();
    const std::size_t sdim = batch.s_next.cols;

    Mat s_rep(b * k, sdim);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < k; ++j)
            std::memcpy(s_rep.row(i * k + j), batch.s_next.row(i), sdim * sizeof(double));
    Mat noise(b * k, nd);
    for (double& v : noise.data) v = rng.gaussian();

    const Mat a_next = target_actor.forward_with_noise_batch(s_rep, noise);
    const Mat x = detail::hcat(s_rep, a_next);
    const Mat v1 = critics.target_q1.forward_batch(x);
    const Mat v2 = critics.target_q2.forward_batch(x);

    Vec y(b);
    for (std::size_t i = 0; i < b; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t r = i * k + j;
            acc += std::min(v1(r, 0), v2(r, 0));
        }
        const double bootstrap = acc / static_cast<double>(k);
        y[i] = batch.r_ent[i] + cfg.gamma * (batch.done[i] ? 0.0 : 1.0) * bootstrap;
    }
    return y;
}

struct CriticUpdateResult {
    double loss_q1 = 0.0;
    double loss_q2 = 0.0;
    double mean_loss() const { return 0.5 * (loss_q1 + loss_q2); }
};

/// One Adam step on the mean squared TD error, independently for each critic.
inline CriticUpdateResult critic_update(const Batch& batch, CriticPair& critics, AdamState& opt_q1,
                                        AdamState& opt_q2, const Vec& y) {
    const std::size_t b = batch.size();
    if (y.size() != b) throw std::invalid_argument("critic_update: target length mismatch");
    const Mat x = detail::hcat(batch.s, batch.a);

    CriticUpdateResult res;
    auto step_one = [&](MlpNet& net, AdamState& opt) {
        MlpNet::BatchCache cache;
        const Mat v = net.forward_batch(x, &cache);
        Mat up(b, 1);
        double loss = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double e = v(i, 0) - y[i];
            loss += e * e;
            up(i, 0) = 2.0 * e / static_cast<double>(b);
        }
        Vec grad;
        net.backward_batch(cache, up, &grad, nullptr);
        Vec params = net.get_params();
        adam_step(params, grad, opt);
        net.set_params(params);
        return loss / static_cast<double>(b);
    };
    res.loss_q1 = step_one(critics.q1, opt_q1);
    res.loss_q2 = step_one(critics.q2, opt_q2);
    return res;
}

struct ActorUpdateStats {
    double matching_loss = 0.0;
    double xi_sum = 0.0;
    double xi_sumsq = 0.0;
    std::size_t xi_count = 0;
};

namespace detail {

inline Vec actor_param_grad(const ExplicitActor& actor, const MlpNet::BatchCache& cache, const Mat& noise,
                            const Mat& pre_squash, const Mat& upstream) {
    return actor.grad_params_batch(cache, noise, pre_squash, upstream);
}

inline Vec actor_param_grad(const ImplicitActor& actor, const MlpNet::BatchCache& cache, const Mat& /*noise*/,
                            const Mat& pre_squash, const Mat& upstream) {
    return actor.grad_params_batch(cache, pre_squash, upstream);
}

}  // namespace detail

/// The direction-matching step. For each state, K shared noises produce
/// actions a0; the noisy target direction is eta * grad_a min(Q1,Q2) + xi with
/// xi ~ N(0, 2 tau eta I); one Adam step pulls the same-noise reforward delta
/// toward it (a0 and the target direction are constants of the step).
template <class Actor>
ActorUpdateStats actor_update(const Mat& states, Actor& actor, AdamState& opt, const ActionValueFn& qfn,
                              const TrainConfig& cfg, Rng rng) {
    const std::size_t b = states.rows;
    const std::size_t k = cfg.action_samples;
    const std::size_t nd = actor.noise_dim();
    const std::size_t adim = actor.action_dim();
    const std::size_t n = b * k;

    Mat s_rep(n, states.cols);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < k; ++j)
            std::memcpy(s_rep.row(i * k + j), states.row(i), states.cols * sizeof(double));
    Mat noise(n, nd);
    for (double& v : noise.data) v = rng.gaussian();

    MlpNet::BatchCache cache;
    Mat pre_squash;
    const Mat a0 = actor.forward_with_noise_batch(s_rep, noise, &cache, &pre_squash);

    Mat grad_a;
    qfn.min_q_grad(s_rep, a0, nullptr, &grad_a);

    ActorUpdateStats stats;
    const double xi_std = std::sqrt(2.0 * cfg.tau * cfg.eta);
    Mat delta_star(n, adim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < adim; ++j) {
            const double xi = xi_std * rng.gaussian();
            stats.xi_sum += xi;
            stats.xi_sumsq += xi * xi;
            ++stats.xi_count;
            delta_star(i, j) = cfg.eta * grad_a(i, j) + xi;
        }

    // At the current parameters the reforward delta is zero, so the loss is
    // |delta_star|^2 / (BK) and d loss / d action = -2 delta_star / (BK).
    const double scale = 1.0 / static_cast<double>(n);
    Mat upstream(n, adim);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < adim; ++j) {
            loss += delta_star(i, j) * delta_star(i, j);
            upstream(i, j) = -2.0 * scale * delta_star(i, j);
        }
    stats.matching_loss = loss * scale;

    const Vec grad = detail::actor_param_grad(actor, cache, noise, pre_squash, upstream);
    Vec params = actor.net().get_params();
    adam_step(params, grad, opt);
    actor.net().set_params(params);
    return stats;
}

// ---- evaluation ----

inline Vec eval_action(const ExplicitActor& actor, const Vec& s, Rng& /*rng*/) {
    return actor.forward_with_noise(s, Vec(actor.noise_dim(), 0.0));
}

inline Vec eval_action(const ImplicitActor& actor, const Vec& s, Rng& rng) {
    Vec z(actor.noise_dim());
    for (double& v : z) v = rng.gaussian();
    return actor.forward_with_noise(s, z);
}

/// Deterministic-seed evaluation: episode e always replays the same reset and
/// (for the implicit actor) the same latent sequence, across evaluations and
/// across runs with the same seed.
template <class Actor>
std::pair<double, double> evaluate_policy(const Env& env, const Actor& actor, std::size_t episodes,
                                          const Rng& eval_base) {
    Vec returns(episodes, 0.0);
    for (std::size_t e = 0; e < episodes; ++e) {
        Rng rng = eval_base.split("ep", e);
        Vec state = env.reset(rng);
        double total = 0.0;
        for (std::size_t t = 1;; ++t) {
            const Vec a = eval_action(actor, state, rng);
            const StepResult sr = env.step(state, a, t);
            total += sr.reward;
            if (sr.terminated || sr.truncated) break;
            state = sr.next_state;
        }
        returns[e] = total;
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(episodes);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    const double sd = episodes > 1 ? std::sqrt(var / static_cast<double>(episodes - 1)) : 0.0;
    return {mean, sd};
}

/// Per-episode returns of the uniform-random policy, measured in the same
/// harness (used as the learning baseline).
inline Vec random_policy_returns(const Env& env, std::size_t episodes, const Rng& base) {
    const ActionBox& box = env.spec().box;
    Vec returns(episodes, 0.0);
    for (std::size_t e = 0; e < episodes; ++e) {
        Rng rng = base.split("ep", e);
        Vec state = env.reset(rng);
        double total = 0.0;
        for (std::size_t t = 1;; ++t) {
            Vec a(box.dim());
            for (std::size_t j = 0; j < a.size(); ++j) a[j] = rng.uniform(box.lo[j], box.hi[j]);
            const StepResult sr = env.step(state, a, t);
            total += sr.reward;
            if (sr.terminated || sr.truncated) break;
            state = sr.next_state;
        }
        returns[e] = total;
    }
    return returns;
}

// ---- checkpoints: [u32 magic][u32 algo][u32 latent_dim][nn bytes] ----

inline constexpr std::uint32_t kCheckpointMagic = 0x57504B31;  // "WPK1"

inline std::vector<std::uint8_t> make_checkpoint(Algo algo, std::size_t latent_dim, const MlpNet& net) {
    std::vector<std::uint8_t> out;
    auto put_u32 = [&out](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    put_u32(kCheckpointMagic);
    put_u32(static_cast<std::uint32_t>(algo));
    put_u32(static_cast<std::uint32_t>(latent_dim));
    const auto nb = net.to_bytes();
    out.insert(out.end(), nb.begin(), nb.end());
    return out;
}

struct LoadedCheckpoint {
    Algo algo = Algo::Wppg;
    std::size_t latent_dim = 0;
    MlpNet net;
};

inline LoadedCheckpoint load_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12) throw std::runtime_error("checkpoint: truncated header");
    auto get_u32 = [&bytes](std::size_t off) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
        return v;
    };
    if (get_u32(0) != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic");
    LoadedCheckpoint out;
    out.algo = static_cast<Algo>(get_u32(4));
    out.latent_dim = get_u32(8);
    out.net = MlpNet::from_bytes(bytes.data() + 12, bytes.size() - 12);
    return out;
}

// ---- the training loop ----

struct CurvePoint {
    std::size_t step = 0;
    double mean_return = 0.0;
    double std_return = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double entropy_estimate = 0.0;
};

struct TrainResult {
    std::vector<CurvePoint> curve;
    std::size_t updates = 0;
    std::size_t episodes = 0;
    std::vector<std::uint8_t> checkpoint;
    double final_mean_return = 0.0;
};

namespace detail {

template <class Actor>
Actor build_actor(const Env& env, const TrainConfig& cfg, Rng& init_rng) {
    const EnvSpec& es = env.spec();
    if constexpr (std::is_same_v<Actor, ExplicitActor>) {
        std::vector<std::size_t> widths;
        widths.push_back(es.state_dim);
        widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
        widths.push_back(2 * es.action_dim);
        MlpNet net(widths, cfg.activation);
        net.init_params(init_rng);
        return ExplicitActor(std::move(net), es.box);
    } else {
        const std::size_t latent = cfg.resolve_latent_dim(es.state_dim);
        std::vector<std::size_t> widths;
        widths.push_back(es.state_dim + latent);
        widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
        widths.push_back(es.action_dim);
        MlpNet net(widths, cfg.activation);
        net.init_params(init_rng);
        return ImplicitActor(std::move(net), latent, es.box);
    }
}

template <class Actor>
TrainResult train_impl(const Env& env, const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const EnvSpec& es = env.spec();
    const Rng root(seed);

    Rng actor_rng = root.split("actor");
    Actor actor = build_actor<Actor>(env, cfg, actor_rng);
    Actor target_actor = actor;

    Rng critic_rng = root.split("critic");
    CriticPair critics = CriticPair::make(es.state_dim, es.action_dim, cfg.hidden, cfg.activation, critic_rng);

    AdamState opt_actor(actor.net().num_params(), cfg.lr_actor);
    AdamState opt_q1(critics.q1.num_params(), cfg.lr_critic);
    AdamState opt_q2(critics.q2.num_params(), cfg.lr_critic);

    ReplayBuffer buffer(cfg.buffer_capacity, es.state_dim, es.action_dim);

    const Rng env_base = root.split("env");
    const Rng entropy_base = root.split("entropy");
    const Rng targets_base = root.split("targets");
    const Rng actor_step_base = root.split("actor_step");
    const Rng eval_base = root.split("eval");
    Rng rollout_rng = root.split("rollout");
    Rng replay_rng = root.split("replay");

    EntropyConfig ent_cfg{cfg.sigma_ent, cfg.mixture_samples, cfg.baseline_samples};
    const ActionSampler sampler = [&actor](const Vec& s, Rng& r) { return actor.sample(s, r).action; };

    TrainResult result;
    Rng reset_rng = env_base.split("ep", result.episodes);
    Vec state = env.reset(reset_rng);
    std::size_t ep_steps = 0;

    double acc_closs = 0.0, acc_aloss = 0.0, acc_ent = 0.0;
    std::size_t acc_updates = 0, acc_ent_n = 0;
    const std::size_t learn_gate = std::max(cfg.learning_starts, cfg.batch_size);

    for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
        auto s = actor.sample(state, rollout_rng);
        Vec a_exec = s.action;
        for (double& v : a_exec) v += cfg.sigma_ent * rollout_rng.gaussian();
        a_exec = es.box.clamp(a_exec);

        const StepResult sr = env.step(state, a_exec, ep_steps + 1);

        const double h_hat = estimate_entropy(state, sampler, ent_cfg, entropy_base.split("t", step));
        acc_ent += h_hat;
        ++acc_ent_n;
        buffer.push({state, a_exec, sr.reward + cfg.tau * h_hat, sr.next_state, sr.terminated});

        if (buffer.size() >= learn_gate) {
            const Batch batch = buffer.sample(cfg.batch_size, replay_rng);
            const Vec y = td_targets(batch, critics, target_actor, cfg, targets_base.split("t", step));
            const CriticUpdateResult cres = critic_update(batch, critics, opt_q1, opt_q2, y);
            const TwinCriticView qview(critics.q1, critics.q2);
            const ActorUpdateStats ares =
                actor_update(batch.s, actor, opt_actor, qview, cfg, actor_step_base.split("t", step));

            critics.target_q1.set_params(
                polyak(critics.target_q1.get_params(), critics.q1.get_params(), cfg.polyak_sigma));
            critics.target_q2.set_params(
                polyak(critics.target_q2.get_params(), critics.q2.get_params(), cfg.polyak_sigma));
            target_actor.net().set_params(
                polyak(target_actor.net().get_params(), actor.net().get_params(), cfg.polyak_sigma));

            ++result.updates;
            ++acc_updates;
            acc_closs += cres.mean_loss();
            acc_aloss += ares.matching_loss;
        }

        if (sr.terminated || sr.truncated) {
            ++result.episodes;
            reset_rng = env_base.split("ep", result.episodes);
            state = env.reset(reset_rng);
            ep_steps = 0;
        } else {
            state = sr.next_state;
            ++ep_steps;
        }

        if (step % cfg.eval_interval == 0 || step == cfg.total_steps) {
            const auto [mean, sd] = evaluate_policy(env, actor, cfg.eval_episodes, eval_base);
            CurvePoint p;
            p.step = step;
            p.mean_return = mean;
            p.std_return = sd;
            p.critic_loss = acc_updates ? acc_closs / static_cast<double>(acc_updates)
                                        : std::numeric_limits<double>::quiet_NaN();
            p.actor_loss = acc_updates ? acc_aloss / static_cast<double>(acc_updates)
                                       : std::numeric_limits<double>::quiet_NaN();
            p.entropy_estimate = acc_ent_n ? acc_ent / static_cast<double>(acc_ent_n)
                                           : std::numeric_limits<double>::quiet_NaN();
            result.curve.push_back(p);
            acc_closs = acc_aloss = acc_ent = 0.0;
            acc_updates = acc_ent_n = 0;
        }
    }

    if (!result.curve.empty()) result.final_mean_return = result.curve.back().mean_return;
    const std::size_t latent = std::is_same_v<Actor, ImplicitActor> ? actor.noise_dim() : 0;
    result.checkpoint = make_checkpoint(std::is_same_v<Actor, ExplicitActor> ? Algo::Wppg : Algo::WppgI, latent,
                                        actor.net());
    return result;
}

}  // namespace detail

inline TrainResult train(const Env& env, Algo algo, const TrainConfig& cfg, std::uint64_t seed) {
    if (algo == Algo::Wppg) return detail::train_impl<ExplicitActor>(env, cfg, seed);
    return detail::train_impl<ImplicitActor>(env, cfg, seed);
}

}  // namespace wppg
