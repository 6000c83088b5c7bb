// Command-line front end: training runs (CSV learning curves + checkpoints),
// theory-lab experiments (JSON trajectories), gradient checking, and
// checkpoint evaluation. Every run requires an explicit seed and writes a
// config echo file with every effective parameter, so outputs are
// reproducible byte for byte.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wppg/agent.hpp"
#include "wppg/envs.hpp"
#include "wppg/theory.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace wppg;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Flat key=value config support: the file's pairs become --key value tokens
// unless the same flag already appears on the command line, so explicit flags
// always win. Unknown keys surface as ordinary unknown-flag errors.
std::vector<std::string> merge_config_args(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::ifstream f(config_path);
    if (!f) throw std::invalid_argument("--config: cannot open " + config_path);
    std::vector<std::string> merged = args;
    std::string line;
    while (std::getline(f, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        const std::size_t eq = line.find('=', start);
        if (eq == std::string::npos) throw std::invalid_argument("--config: expected key=value, got: " + line);
        const std::string key = line.substr(start, eq - start);
        const std::string value = line.substr(eq + 1);
        const std::string flag = "--" + key;
        bool overridden = false;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) overridden = true;
        if (!overridden) {
            merged.push_back(flag);
            merged.push_back(value);
        }
    }
    return merged;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << content;
}

void write_config_echo(const std::string& out_path, const std::map<std::string, std::string>& kv) {
    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
    write_file(out_path + ".config", os.str());
}

std::string seed_suffixed(const std::string& path, std::uint64_t seed) {
    const std::filesystem::path p(path);
    std::filesystem::path out = p.parent_path() / p.stem();
    out += "_seed" + std::to_string(seed);
    out += p.extension();
    return out.string();
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoul(tok)));
    }
    if (out.empty()) throw CLI::ValidationError("--hidden", "expected a comma-separated width list");
    return out;
}

// ---- train ----

struct TrainArgs {
    std::string env = "pointmass";
    std::string algo = "wppg";
    std::string out = "train.csv";
    std::string hidden = "16,16";
    std::string activation = "tanh";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string seeds;
    TrainConfig cfg;
};

std::map<std::string, std::string> train_echo(const TrainArgs& a, std::uint64_t seed, const std::string& out) {
    const TrainConfig& c = a.cfg;
    std::map<std::string, std::string> kv;
    kv["subcommand"] = "train";
    kv["env"] = a.env;
    kv["algo"] = a.algo;
    kv["seed"] = std::to_string(seed);
    kv["out"] = out;
    kv["tau"] = fmt_double(c.tau);
    kv["eta"] = fmt_double(c.eta);
    kv["action-samples"] = std::to_string(c.action_samples);
    kv["gamma"] = fmt_double(c.gamma);
    kv["polyak"] = fmt_double(c.polyak_sigma);
    kv["lr-actor"] = fmt_double(c.lr_actor);
    kv["lr-critic"] = fmt_double(c.lr_critic);
    kv["batch-size"] = std::to_string(c.batch_size);
    kv["buffer-capacity"] = std::to_string(c.buffer_capacity);
    kv["learning-starts"] = std::to_string(c.learning_starts);
    kv["total-steps"] = std::to_string(c.total_steps);
    kv["eval-interval"] = std::to_string(c.eval_interval);
    kv["eval-episodes"] = std::to_string(c.eval_episodes);
    kv["sigma-ent"] = fmt_double(c.sigma_ent);
    kv["mixture-samples"] = std::to_string(c.mixture_samples);
    kv["baseline-samples"] = std::to_string(c.baseline_samples);
    kv["latent-dim"] = std::to_string(c.latent_dim);
    kv["hidden"] = a.hidden;
    kv["activation"] = a.activation;
    return kv;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream os;
    os << "step,mean_return,std_return,critic_loss,actor_loss,entropy_estimate\n";
    for (const auto& p : curve)
        os << p.step << "," << fmt_double(p.mean_return) << "," << fmt_double(p.std_return) << ","
           << fmt_double(p.critic_loss) << "," << fmt_double(p.actor_loss) << ","
           << fmt_double(p.entropy_estimate) << "\n";
    return os.str();
}

void run_single_train(const TrainArgs& a, std::uint64_t seed, const std::string& out) {
    const auto env = make_env(a.env);
    const TrainResult res = train(*env, algo_from_string(a.algo), a.cfg, seed);
    write_file(out, curve_csv(res.curve));
    const std::string ckpt = std::filesystem::path(out).replace_extension(".ckpt").string();
    std::ofstream cf(ckpt, std::ios::binary);
    if (!cf) throw std::runtime_error("cannot open for write: " + ckpt);
    cf.write(reinterpret_cast<const char*>(res.checkpoint.data()),
             static_cast<std::streamsize>(res.checkpoint.size()));
    cf.close();
    write_config_echo(out, train_echo(a, seed, out));
    std::printf("train done: env=%s algo=%s seed=%" PRIu64 " final_mean_return=%s curve=%s\n", a.env.c_str(),
                a.algo.c_str(), seed, fmt_double(res.final_mean_return).c_str(), out.c_str());
}

int run_train(const TrainArgs& args_in) {
    TrainArgs args = args_in;
    args.cfg.hidden = parse_hidden(args.hidden);
    if (args.activation == "tanh")
        args.cfg.activation = Activation::Tanh;
    else if (args.activation == "relu")
        args.cfg.activation = Activation::Relu;
    else
        throw CLI::ValidationError("--activation", "expected tanh or relu");
    args.cfg.validate();

    std::vector<std::uint64_t> seeds;
    if (!args.seeds.empty()) {
        std::stringstream ss(args.seeds);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) seeds.push_back(std::stoull(tok));
    } else if (args.seed_set) {
        seeds.push_back(args.seed);
    }
    if (seeds.empty()) throw CLI::ValidationError("--seed", "a seed is required (no wall-clock seeding)");

    if (seeds.size() == 1) {
        run_single_train(args, seeds[0], args.out);
        return 0;
    }
    std::vector<std::future<void>> futs;
    futs.reserve(seeds.size());
    for (const std::uint64_t s : seeds)
        futs.push_back(std::async(std::launch::async,
                                  [&args, s] { run_single_train(args, s, seed_suffixed(args.out, s)); }));
    for (auto& f : futs) f.get();
    return 0;
}

// ---- theory ----

struct TheoryArgs {
    std::string mdp = "builtin3";
    double tau = 0.1;
    double eta = 0.5;
    std::size_t steps = 60;
    std::string mode = "exact";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out = "theory.json";
    std::size_t mdp_states = 3;
    std::size_t mdp_actions = 11;
    double gamma = 0.9;
};

int run_theory(const TheoryArgs& a) {
    if (!a.seed_set) throw CLI::ValidationError("--seed", "a seed is required (no wall-clock seeding)");
    FiniteMdp mdp;
    if (a.mdp == "builtin3") {
        mdp = builtin3_mdp();
    } else if (a.mdp == "random") {
        Rng rng = Rng(a.seed).split("mdp");
        mdp = random_mdp(a.mdp_states, a.mdp_actions, a.gamma, rng);
    } else {
        throw CLI::ValidationError("--mdp", "expected builtin3 or random");
    }

    const ProxMode mode = prox_mode_from_string(a.mode);
    const WppgTrajectory traj = wppg_iterate(mdp, TabularPolicy::uniform(mdp), a.tau, a.eta, a.steps, mode);
    const ContractionFit fit = fit_contraction(traj, a.tau);

    json out;
    out["config"] = {{"mdp", a.mdp},    {"tau", a.tau},   {"eta", a.eta},
                     {"steps", a.steps}, {"mode", a.mode}, {"seed", a.seed},
                     {"gamma", mdp.gamma}, {"n_states", mdp.n_states}, {"n_actions", mdp.n_actions()}};
    out["j_star"] = traj.j_star;
    out["contraction"] = {{"lambda_hat", fit.lambda_hat}, {"ratio", fit.ratio}, {"r_squared", fit.r_squared}};
    out["iters"] = json::array();
    for (const auto& rec : traj.records) {
        json r;
        r["k"] = rec.k;
        r["J"] = rec.j;
        r["D"] = rec.d;
        r["min_support"] = rec.min_support;
        r["v"] = rec.v;
        r["residuals"] = rec.prox_residuals;
        out["iters"].push_back(r);
    }
    write_file(a.out, out.dump(2) + "\n");

    std::map<std::string, std::string> kv;
    kv["subcommand"] = "theory";
    kv["mdp"] = a.mdp;
    kv["tau"] = fmt_double(a.tau);
    kv["eta"] = fmt_double(a.eta);
    kv["steps"] = std::to_string(a.steps);
    kv["mode"] = a.mode;
    kv["seed"] = std::to_string(a.seed);
    kv["out"] = a.out;
    kv["gamma"] = fmt_double(mdp.gamma);
    kv["n-states"] = std::to_string(mdp.n_states);
    kv["n-actions"] = std::to_string(mdp.n_actions());
    write_config_echo(a.out, kv);
    std::printf("theory done: mode=%s steps=%zu J0=%s Jfinal=%s ratio=%s out=%s\n", a.mode.c_str(), a.steps,
                fmt_double(traj.records.front().j).c_str(), fmt_double(traj.records.back().j).c_str(),
                fmt_double(fit.ratio).c_str(), a.out.c_str());
    return 0;
}

// ---- gradcheck ----

// Pre-activations recomputed from the flat parameter vector, used to steer
// ReLU checks away from kinks that finite differences would straddle.
double min_abs_preactivation(const MlpNet& net, const Vec& x) {
    const Vec params = net.get_params();
    const auto& widths = net.widths();
    Vec h = x;
    std::size_t off = 0;
    double min_abs = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out_w = widths[l + 1];
        Vec z(out_w, 0.0);
        for (std::size_t k = 0; k < in; ++k)
            for (std::size_t j = 0; j < out_w; ++j) z[j] += h[k] * params[off + k * out_w + j];
        off += in * out_w;
        for (std::size_t j = 0; j < out_w; ++j) z[j] += params[off + j];
        off += out_w;
        if (l + 2 < widths.size()) {
            for (double& v : z) {
                min_abs = std::min(min_abs, std::abs(v));
                v = net.activation() == Activation::Tanh ? std::tanh(v) : std::max(v, 0.0);
            }
        }
        h = z;
    }
    return min_abs;
}

double central_diff_params(MlpNet net, Vec params, std::size_t i, const Vec& x, const Vec& u, double h = 1e-5) {
    const double p0 = params[i];
    params[i] = p0 + h;
    net.set_params(params);
    const double up = dot(net.forward(x), u);
    params[i] = p0 - h;
    net.set_params(params);
    const double down = dot(net.forward(x), u);
    return (up - down) / (2.0 * h);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

double check_net_architecture(const std::vector<std::size_t>& widths, Activation act, Rng rng,
                              std::size_t max_param_coords) {
    double worst = 0.0;
    for (int instance = 0; instance < 10; ++instance) {
        MlpNet net(widths, act);
        Rng irng = rng.split("net", static_cast<std::uint64_t>(instance));
        net.init_params(irng);
        Vec x(widths.front()), u(widths.back());
        for (int guard = 0;; ++guard) {
            for (double& v : x) v = irng.uniform(-1.5, 1.5);
            if (act == Activation::Tanh || min_abs_preactivation(net, x) > 1e-3 || guard > 50) break;
        }
        for (double& v : u) v = irng.uniform(-1, 1);

        net.forward(x);
        const Vec gp = net.grad_params(x, u);
        const Vec gx = net.grad_input(x, u);
        const Vec params = net.get_params();

        const std::size_t stride = std::max<std::size_t>(1, params.size() / max_param_coords);
        const std::size_t phase = static_cast<std::size_t>(instance) % stride;
        for (std::size_t i = phase; i < params.size(); i += stride)
            worst = std::max(worst, rel_err(gp[i], central_diff_params(net, params, i, x, u)));

        MlpNet probe = net;
        for (std::size_t i = 0; i < x.size(); ++i) {
            Vec xp = x, xm = x;
            xp[i] += 1e-5;
            xm[i] -= 1e-5;
            const double fd = (dot(probe.forward(xp), u) - dot(probe.forward(xm), u)) / 2e-5;
            worst = std::max(worst, rel_err(gx[i], fd));
        }
    }
    return worst;
}

double check_actor_gradients(Rng rng) {
    double worst = 0.0;
    for (int instance = 0; instance < 10; ++instance) {
        Rng irng = rng.split("actor", static_cast<std::uint64_t>(instance));
        const std::size_t sdim = 3, adim = 2, latent = 2;

        MlpNet enet({sdim, 16, 16, 2 * adim}, Activation::Tanh);
        enet.init_params(irng);
        ExplicitActor ea(std::move(enet), ActionBox::symmetric(adim, 1.0));
        MlpNet inet({sdim + latent, 16, 16, adim}, Activation::Tanh);
        inet.init_params(irng);
        ImplicitActor ia(std::move(inet), latent, ActionBox::symmetric(adim, 1.0));

        Vec s(sdim), u(adim), eps(adim), z(latent);
        for (double& v : s) v = irng.uniform(-1, 1);
        for (double& v : u) v = irng.uniform(-1, 1);
        for (double& v : eps) v = irng.gaussian();
        for (double& v : z) v = irng.gaussian();

        {
            const Vec g = ea.grad_state(s, eps, u);
            for (std::size_t i = 0; i < sdim; ++i) {
                Vec sp = s, sm = s;
                sp[i] += 1e-5;
                sm[i] -= 1e-5;
                const double fd = (dot(ea.forward_with_noise(sp, eps), u) - dot(ea.forward_with_noise(sm, eps), u)) / 2e-5;
                worst = std::max(worst, rel_err(g[i], fd));
            }
            MlpNet::BatchCache cache;
            Mat pre;
            const Mat epsm(1, adim, eps);
            ea.forward_with_noise_batch(Mat(1, sdim, s), epsm, &cache, &pre);
            const Vec gp = ea.grad_params_batch(cache, epsm, pre, Mat(1, adim, u));
            Vec params = ea.net().get_params();
            for (std::size_t i = 0; i < params.size(); ++i) {
                const double p0 = params[i];
                ExplicitActor probe = ea;
                params[i] = p0 + 1e-5;
                probe.net().set_params(params);
                const double up = dot(probe.forward_with_noise(s, eps), u);
                params[i] = p0 - 1e-5;
                probe.net().set_params(params);
                const double down = dot(probe.forward_with_noise(s, eps), u);
                params[i] = p0;
                worst = std::max(worst, rel_err(gp[i], (up - down) / 2e-5));
            }
        }
        {
            const Vec g = ia.grad_state(s, z, u);
            for (std::size_t i = 0; i < sdim; ++i) {
                Vec sp = s, sm = s;
                sp[i] += 1e-5;
                sm[i] -= 1e-5;
                const double fd = (dot(ia.forward_with_noise(sp, z), u) - dot(ia.forward_with_noise(sm, z), u)) / 2e-5;
                worst = std::max(worst, rel_err(g[i], fd));
            }
            MlpNet::BatchCache cache;
            Mat pre;
            ia.forward_with_noise_batch(Mat(1, sdim, s), Mat(1, latent, z), &cache, &pre);
            const Vec gp = ia.grad_params_batch(cache, pre, Mat(1, adim, u));
            Vec params = ia.net().get_params();
            for (std::size_t i = 0; i < params.size(); ++i) {
                const double p0 = params[i];
                ImplicitActor probe = ia;
                params[i] = p0 + 1e-5;
                probe.net().set_params(params);
                const double up = dot(probe.forward_with_noise(s, z), u);
                params[i] = p0 - 1e-5;
                probe.net().set_params(params);
                const double down = dot(probe.forward_with_noise(s, z), u);
                params[i] = p0;
                worst = std::max(worst, rel_err(gp[i], (up - down) / 2e-5));
            }
        }
    }
    return worst;
}

int run_gradcheck(std::uint64_t seed) {
    const Rng root(seed);
    double worst = 0.0;
    struct Suite {
        const char* name;
        double err;
    };
    std::vector<Suite> suites;
    suites.push_back({"mlp tanh (64,64)", check_net_architecture({5, 64, 64, 3}, Activation::Tanh,
                                                                 root.split("t64"), 400)});
    suites.push_back({"mlp relu (256,256)", check_net_architecture({8, 256, 256, 4}, Activation::Relu,
                                                                   root.split("r256"), 200)});
    suites.push_back({"mlp tanh (16,16)",
                      check_net_architecture({4, 16, 16, 2}, Activation::Tanh, root.split("t16"), 1u << 20)});
    suites.push_back({"critic tanh (16,16)",
                      check_net_architecture({6, 16, 16, 1}, Activation::Tanh, root.split("c16"), 1u << 20)});
    suites.push_back({"actors + squash", check_actor_gradients(root.split("actors"))});
    for (const auto& s : suites) {
        worst = std::max(worst, s.err);
        std::printf("gradcheck %-22s max_rel_err=%s\n", s.name, fmt_double(s.err).c_str());
    }
    std::printf("gradcheck overall max_rel_err=%s threshold=0.0001\n", fmt_double(worst).c_str());
    return worst < 1e-4 ? 0 : 1;
}

// ---- eval ----

struct EvalArgs {
    std::string checkpoint;
    std::string env = "pointmass";
    std::size_t episodes = 10;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
};

int run_eval(const EvalArgs& a) {
    if (!a.seed_set) throw CLI::ValidationError("--seed", "a seed is required (no wall-clock seeding)");
    std::ifstream f(a.checkpoint, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + a.checkpoint);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const LoadedCheckpoint ck = load_checkpoint(bytes);

    const auto env = make_env(a.env);
    const EnvSpec& es = env->spec();
    const Rng eval_rng = Rng(a.seed).split("eval");
    double mean = 0.0, sd = 0.0;
    if (ck.algo == Algo::Wppg) {
        if (ck.net.input_width() != es.state_dim)
            throw std::runtime_error("checkpoint does not match env: state width differs");
        const ExplicitActor actor(ck.net, es.box);
        std::tie(mean, sd) = evaluate_policy(*env, actor, a.episodes, eval_rng);
    } else {
        if (ck.net.input_width() != es.state_dim + ck.latent_dim)
            throw std::runtime_error("checkpoint does not match env: state width differs");
        const ImplicitActor actor(ck.net, ck.latent_dim, es.box);
        std::tie(mean, sd) = evaluate_policy(*env, actor, a.episodes, eval_rng);
    }
    std::ostringstream os;
    os << "mean_return,std_return,episodes\n"
       << fmt_double(mean) << "," << fmt_double(sd) << "," << a.episodes << "\n";
    std::fputs(os.str().c_str(), stdout);
    if (!a.out.empty()) {
        write_file(a.out, os.str());
        std::map<std::string, std::string> kv;
        kv["subcommand"] = "eval";
        kv["checkpoint"] = a.checkpoint;
        kv["env"] = a.env;
        kv["episodes"] = std::to_string(a.episodes);
        kv["seed"] = std::to_string(a.seed);
        kv["out"] = a.out;
        write_config_echo(a.out, kv);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein proximal policy gradient laboratory"};
    app.require_subcommand(1);

    TrainArgs ta;
    std::string config_path;
    CLI::App* train_cmd = app.add_subcommand("train", "Train an agent and write a CSV learning curve");
    train_cmd->add_option("--config", config_path, "flat key=value config file; flags override it");
    train_cmd->add_option("--env", ta.env, "pointmass | pendulum | lqr1d");
    train_cmd->add_option("--algo", ta.algo, "wppg | wppg-i");
    train_cmd->add_option("--out", ta.out, "output CSV path");
    train_cmd->add_option("--seed", ta.seed, "run seed")->each([&ta](const std::string&) { ta.seed_set = true; });
    train_cmd->add_option("--seeds", ta.seeds, "comma-separated seeds, fanned out concurrently");
    train_cmd->add_option("--tau", ta.cfg.tau, "entropy scale");
    train_cmd->add_option("--eta", ta.cfg.eta, "Wasserstein step size");
    train_cmd->add_option("--action-samples", ta.cfg.action_samples, "K action samples");
    train_cmd->add_option("--gamma", ta.cfg.gamma, "discount");
    train_cmd->add_option("--polyak", ta.cfg.polyak_sigma, "target mixing coefficient");
    train_cmd->add_option("--lr-actor", ta.cfg.lr_actor, "actor learning rate");
    train_cmd->add_option("--lr-critic", ta.cfg.lr_critic, "critic learning rate");
    train_cmd->add_option("--batch-size", ta.cfg.batch_size, "minibatch size");
    train_cmd->add_option("--buffer-capacity", ta.cfg.buffer_capacity, "replay capacity");
    train_cmd->add_option("--learning-starts", ta.cfg.learning_starts, "steps before updates begin");
    train_cmd->add_option("--total-steps", ta.cfg.total_steps, "environment steps");
    train_cmd->add_option("--eval-interval", ta.cfg.eval_interval, "steps between evaluations");
    train_cmd->add_option("--eval-episodes", ta.cfg.eval_episodes, "episodes per evaluation");
    train_cmd->add_option("--sigma-ent", ta.cfg.sigma_ent, "action convolution noise std");
    train_cmd->add_option("--mixture-samples", ta.cfg.mixture_samples, "entropy mixture samples M");
    train_cmd->add_option("--baseline-samples", ta.cfg.baseline_samples, "entropy baseline samples L");
    train_cmd->add_option("--latent-dim", ta.cfg.latent_dim, "implicit latent dim (-1: ceil(state_dim/3))");
    train_cmd->add_option("--hidden", ta.hidden, "hidden widths, e.g. 16,16");
    train_cmd->add_option("--activation", ta.activation, "tanh | relu");

    TheoryArgs tha;
    CLI::App* theory_cmd = app.add_subcommand("theory", "Run the finite-MDP proximal iteration lab");
    theory_cmd->add_option("--config", config_path, "flat key=value config file; flags override it");
    theory_cmd->add_option("--mdp", tha.mdp, "builtin3 | random");
    theory_cmd->add_option("--tau", tha.tau, "entropy scale");
    theory_cmd->add_option("--eta", tha.eta, "Wasserstein step size");
    theory_cmd->add_option("--steps", tha.steps, "outer iterations");
    theory_cmd->add_option("--mode", tha.mode, "exact | split");
    theory_cmd->add_option("--seed", tha.seed, "run seed")->each([&tha](const std::string&) { tha.seed_set = true; });
    theory_cmd->add_option("--out", tha.out, "output JSON path");
    theory_cmd->add_option("--mdp-states", tha.mdp_states, "random MDP state count");
    theory_cmd->add_option("--mdp-actions", tha.mdp_actions, "random MDP action count");
    theory_cmd->add_option("--gamma", tha.gamma, "random MDP discount");

    std::uint64_t gc_seed = 0;
    bool gc_seed_set = false;
    CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of every gradient path");
    gradcheck_cmd->add_option("--seed", gc_seed, "run seed")->each([&gc_seed_set](const std::string&) {
        gc_seed_set = true;
    });

    EvalArgs ea;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint deterministically");
    eval_cmd->add_option("--checkpoint", ea.checkpoint, "checkpoint path")->required();
    eval_cmd->add_option("--env", ea.env, "environment name");
    eval_cmd->add_option("--episodes", ea.episodes, "evaluation episodes");
    eval_cmd->add_option("--seed", ea.seed, "run seed")->each([&ea](const std::string&) { ea.seed_set = true; });
    eval_cmd->add_option("--out", ea.out, "optional CSV output path");

    try {
        std::vector<std::string> raw_args(argv + 1, argv + argc);
        const std::vector<std::string> merged = merge_config_args(raw_args);
        std::vector<const char*> argv2;
        argv2.push_back(argv[0]);
        for (const auto& a : merged) argv2.push_back(a.c_str());
        app.parse(static_cast<int>(argv2.size()), argv2.data());
        if (train_cmd->parsed()) return run_train(ta);
        if (theory_cmd->parsed()) return run_theory(tha);
        if (gradcheck_cmd->parsed()) {
            if (!gc_seed_set) throw CLI::ValidationError("--seed", "a seed is required (no wall-clock seeding)");
            return run_gradcheck(gc_seed);
        }
        if (eval_cmd->parsed()) return run_eval(ea);
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return 1;
    }
}
