#pragma once

// Deterministic, dependency-free continuous-control environments behind one
// interface. Dynamics are pure functions of (state, action); randomness only
// enters through reset.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "wppg/numeric.hpp"
#include "wppg/policy.hpp"

namespace wppg {

struct EnvSpec {
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    ActionBox box;
    std::size_t max_steps = 0;
    double dt = 0.0;
};

struct StepResult {
    Vec next_state;
    double reward = 0.0;
    bool terminated = false;
    bool truncated = false;
};

class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual Vec reset(Rng& rng) const = 0;
    /// step_index is 1-based (the count of steps taken including this one);
    /// it only feeds the truncation flag.
    virtual StepResult step(const Vec& state, const Vec& action, std::size_t step_index) const = 0;

protected:
    void check_io(const Vec& state, const Vec& action) const {
        if (state.size() != spec().state_dim) throw std::invalid_argument("env step: state width mismatch");
        if (action.size() != spec().action_dim) throw std::invalid_argument("env step: action width mismatch");
        for (double v : state)
            if (!std::isfinite(v)) throw std::invalid_argument("env step: non-finite state");
        for (double v : action)
            if (!std::isfinite(v)) throw std::invalid_argument("env step: non-finite action");
    }
};

/// 2-D point mass: vel += a*dt, pos += vel*dt (semi-implicit Euler).
/// r = -|pos-goal| - 0.1|a|^2, terminates within 0.05 of the goal (0.8, 0.8).
class PointMassEnv final : public Env {
public:
    PointMassEnv() {
        spec_.state_dim = 4;  // px, py, vx, vy
        spec_.action_dim = 2;
        spec_.box = ActionBox::symmetric(2, 1.0);
        spec_.max_steps = 200;
        spec_.dt = 0.05;
    }

    const EnvSpec& spec() const override { return spec_; }

    Vec reset(Rng& rng) const override {
        return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0, 0.0};
    }

    StepResult step(const Vec& state, const Vec& action, std::size_t step_index) const override {
        check_io(state, action);
        const double dt = spec_.dt;
        StepResult out;
        const double vx = state[2] + action[0] * dt;
        const double vy = state[3] + action[1] * dt;
        const double px = state[0] + vx * dt;
        const double py = state[1] + vy * dt;
        out.next_state = {px, py, vx, vy};
        const double dist = std::hypot(px - kGoalX, py - kGoalY);
        out.reward = -dist - 0.1 * (action[0] * action[0] + action[1] * action[1]);
        out.terminated = dist < 0.05;
        out.truncated = !out.terminated && step_index >= spec_.max_steps;
        return out;
    }

    static constexpr double kGoalX = 0.8;
    static constexpr double kGoalY = 0.8;

private:
    EnvSpec spec_;
};

/// Pendulum swing-up, state (theta, theta_dot) with theta wrapped to [-pi, pi].
/// theta_ddot = -(g/l) sin(theta + pi) + u / (m l^2), g=10, m=l=1, u in [-2,2],
/// theta_dot clamped to [-8, 8]; r = -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2).
class PendulumEnv final : public Env {
public:
    PendulumEnv() {
        spec_.state_dim = 2;
        spec_.action_dim = 1;
        spec_.box = ActionBox::symmetric(1, 2.0);
        spec_.max_steps = 200;
        spec_.dt = 0.05;
    }

    const EnvSpec& spec() const override { return spec_; }

    Vec reset(Rng& rng) const override {
        return {rng.uniform(-M_PI, M_PI), rng.uniform(-1.0, 1.0)};
    }

    StepResult step(const Vec& state, const Vec& action, std::size_t step_index) const override {
        check_io(state, action);
        const double dt = spec_.dt;
        const double theta = state[0];
        const double u = action[0];
        // -g sin(theta + pi) == g sin(theta); the identity keeps the upright
        // equilibrium exact in floating point. m = l = 1.
        const double acc = kGravity * std::sin(theta) + u;
        double omega = state[1] + acc * dt;
        omega = std::clamp(omega, -kMaxSpeed, kMaxSpeed);
        const double theta_next = wrap_angle(theta + omega * dt);

        StepResult out;
        out.next_state = {theta_next, omega};
        const double tw = wrap_angle(theta_next);
        out.reward = -(tw * tw + 0.1 * omega * omega + 0.001 * u * u);
        out.terminated = false;
        out.truncated = step_index >= spec_.max_steps;
        return out;
    }

    static double wrap_angle(double t) {
        t = std::fmod(t + M_PI, 2.0 * M_PI);
        if (t < 0.0) t += 2.0 * M_PI;
        return t - M_PI;
    }

    static constexpr double kGravity = 10.0;
    static constexpr double kMaxSpeed = 8.0;

private:
    EnvSpec spec_;
};

/// Scalar discounted LQR: x' = 0.95 x + 0.1 a, r = -(x^2 + 0.01 a^2).
class Lqr1dEnv final : public Env {
public:
    Lqr1dEnv() {
        spec_.state_dim = 1;
        spec_.action_dim = 1;
        spec_.box = ActionBox::symmetric(1, 1.0);
        spec_.max_steps = 100;
        spec_.dt = 1.0;
    }

    const EnvSpec& spec() const override { return spec_; }

    Vec reset(Rng& rng) const override { return {rng.uniform(-1.0, 1.0)}; }

    StepResult step(const Vec& state, const Vec& action, std::size_t step_index) const override {
        check_io(state, action);
        StepResult out;
        out.next_state = {0.95 * state[0] + 0.1 * action[0]};
        out.reward = -(state[0] * state[0] + 0.01 * action[0] * action[0]);
        out.terminated = false;
        out.truncated = step_index >= spec_.max_steps;
        return out;
    }

private:
    EnvSpec spec_;
};

inline std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "pointmass") return std::make_unique<PointMassEnv>();
    if (name == "pendulum") return std::make_unique<PendulumEnv>();
    if (name == "lqr1d") return std::make_unique<Lqr1dEnv>();
    throw std::invalid_argument("unknown env: " + name + " (expected pointmass, pendulum or lqr1d)");
}

}  // namespace wppg
