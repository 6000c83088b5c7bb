#pragma once

// Plug-in mixture entropy estimation for a Gaussian-convolved sampling policy.
// The estimator only needs the ability to sample actions, never a density:
// mixture centers come from fresh generator draws, baselines are fresh draws
// convolved with N(0, sigma^2 I), and the entropy is the average negative
// log of the kernel mixture at the baselines.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "wppg/numeric.hpp"

namespace wppg {

struct EntropyConfig {
    double sigma_ent = 0.1;  // action-space std of the convolution kernel
    std::size_t mixture_samples = 32;  // M
    std::size_t baseline_samples = 32;  // L

    void validate() const {
        if (!(sigma_ent > 0.0)) throw std::invalid_argument("EntropyConfig: sigma_ent must be > 0");
        if (mixture_samples < 1 || baseline_samples < 1)
            throw std::invalid_argument("EntropyConfig: M and L must be >= 1");
    }
};

/// log of the isotropic Gaussian density at x, d_a dimensions.
inline double kernel_logpdf(const Vec& x, double sigma, std::size_t d_a) {
    if (!(sigma > 0.0)) throw std::invalid_argument("kernel_logpdf: sigma must be > 0");
    if (x.size() != d_a) throw std::invalid_argument("kernel_logpdf: dimension mismatch");
    double sq = 0.0;
    for (double v : x) sq += v * v;
    return -0.5 * static_cast<double>(d_a) * std::log(2.0 * M_PI * sigma * sigma) - sq / (2.0 * sigma * sigma);
}

/// Draws fresh pre-convolution actions for a given state. The callable must
/// consume noise only from the rng it is handed.
using ActionSampler = std::function<Vec(const Vec& state, Rng& rng)>;

// Substream labels, fixed so callers can reproduce the draws.
inline constexpr std::string_view kEntropyCentersLabel = "ent_centers";
inline constexpr std::string_view kEntropyBaselinesLabel = "ent_baselines";
inline constexpr std::string_view kEntropyNoiseLabel = "ent_noise";

/// H_hat(s) = -(1/L) sum_l log[(1/M) sum_j phi_sigma(a_l - mu_j)] with
/// mu_j = g(s, z_j) and a_l = g(s, z~_l) + sigma * xi_l. Log-sum-exp keeps the
/// inner mixture stable even when every kernel term underflows.
inline double estimate_entropy(const Vec& s, const ActionSampler& sampler, const EntropyConfig& cfg, const Rng& rng) {
    cfg.validate();
    Rng rng_centers = rng.split(kEntropyCentersLabel);
    Rng rng_base = rng.split(kEntropyBaselinesLabel);
    Rng rng_noise = rng.split(kEntropyNoiseLabel);

    std::vector<Vec> centers(cfg.mixture_samples);
    for (auto& c : centers) c = sampler(s, rng_centers);
    const std::size_t d = centers.front().size();
    const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI * cfg.sigma_ent * cfg.sigma_ent);
    const double inv2s2 = 1.0 / (2.0 * cfg.sigma_ent * cfg.sigma_ent);

    double acc = 0.0;
    Vec logs(cfg.mixture_samples);
    for (std::size_t l = 0; l < cfg.baseline_samples; ++l) {
        Vec a = sampler(s, rng_base);
        for (double& v : a) v += cfg.sigma_ent * rng_noise.gaussian();
        for (std::size_t j = 0; j < centers.size(); ++j) {
            double sq = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = a[t] - centers[j][t];
                sq += diff * diff;
            }
            logs[j] = log_norm - sq * inv2s2;
        }
        double mx = logs[0];
        for (double v : logs) mx = std::max(mx, v);
        double sum = 0.0;
        for (double v : logs) sum += std::exp(v - mx);
        const double log_mix = mx + std::log(sum) - std::log(static_cast<double>(cfg.mixture_samples));
        acc -= log_mix;
    }
    return acc / static_cast<double>(cfg.baseline_samples);
}

}  // namespace wppg
