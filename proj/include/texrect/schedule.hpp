#pragma once

#include "texrect/image.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace texrect {

// Deterministic DDIM arithmetic over a sub-grid of the backbone's native
// training schedule.
//
// Latents are indexed by noise level 0..T (T+1 levels, level 0 = clean input).
// alpha_bar[0] is exactly 1 (clean endpoint); alpha_bar[k] for k >= 1 is the
// native table entry at (k-1)*stride, leading spacing. The transition between
// levels k and k+1 conditions the noise predictor on native timestep k*stride
// in both directions.
struct NoiseSchedule {
    int steps = 0;       // T
    int stride = 0;
    int native_len = 0;
    std::vector<double> alpha_bar;  // T+1 entries, strictly decreasing, [0] = 1

    double at(int level) const {
        require(level >= 0 && level <= steps, "schedule: level " + std::to_string(level) +
                                                  " outside [0," + std::to_string(steps) + "]");
        return alpha_bar[static_cast<size_t>(level)];
    }

    // Native timestep conditioning the predictor for the transition k <-> k+1.
    int native_timestep(int transition) const {
        require(transition >= 0 && transition < steps,
                "schedule: transition " + std::to_string(transition) + " outside [0," +
                    std::to_string(steps) + ")");
        return transition * stride;
    }

    // Native timestep associated with a recorded level (the transition below it).
    int record_timestep(int level) const {
        require(level >= 0 && level <= steps, "schedule: bad record level");
        return std::min(level, steps - 1) * stride;
    }
};

inline NoiseSchedule build_schedule(int num_steps, std::span<const double> native_alpha_bar) {
    int native_len = static_cast<int>(native_alpha_bar.size());
    require(num_steps >= 1, "build_schedule: num_steps must be >= 1, got " +
                                std::to_string(num_steps));
    require(num_steps <= native_len,
            "build_schedule: num_steps " + std::to_string(num_steps) +
                " exceeds native length " + std::to_string(native_len));
    require(native_len % num_steps == 0,
            "build_schedule: num_steps " + std::to_string(num_steps) +
                " does not divide native length " + std::to_string(native_len));

    NoiseSchedule sched;
    sched.steps = num_steps;
    sched.stride = native_len / num_steps;
    sched.native_len = native_len;
    sched.alpha_bar.resize(static_cast<size_t>(num_steps) + 1);
    sched.alpha_bar[0] = 1.0;
    for (int k = 1; k <= num_steps; ++k) {
        double a = native_alpha_bar[static_cast<size_t>(k - 1) * sched.stride];
        require(a > 0.0 && a <= 1.0, "build_schedule: native alpha_bar out of (0,1] at index " +
                                         std::to_string((k - 1) * sched.stride));
        sched.alpha_bar[static_cast<size_t>(k)] = a;
    }
    for (int k = 0; k < num_steps; ++k) {
        require(sched.alpha_bar[k + 1] < sched.alpha_bar[k],
                "build_schedule: alpha_bar not strictly decreasing at level " +
                    std::to_string(k + 1));
    }
    return sched;
}

// Native alpha-bar table of the v1-series latent diffusion backbones
// (scaled-linear betas).
inline std::vector<double> scaled_linear_alpha_bar(int n = 1000,
                                                   double linear_start = 0.00085,
                                                   double linear_end = 0.012) {
    std::vector<double> table(static_cast<size_t>(n));
    double b0 = std::sqrt(linear_start);
    double b1 = std::sqrt(linear_end);
    double prod = 1.0;
    for (int i = 0; i < n; ++i) {
        double beta = b0 + (b1 - b0) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.0);
        prod *= 1.0 - beta * beta;
        table[static_cast<size_t>(i)] = prod;
    }
    return table;
}

namespace detail {
inline void check_step_shapes(const LatentImage& z, const LatentImage& eps) {
    require(z.same_shape(eps), "ddim step: latent/noise shape mismatch");
}
}  // namespace detail

// Clean-sample estimate: (z - sqrt(1 - abar_t) * eps) / sqrt(abar_t).
inline LatentImage predict_x0(const LatentImage& z, const LatentImage& eps, int level,
                              const NoiseSchedule& sched) {
    detail::check_step_shapes(z, eps);
    double abar = sched.at(level);
    require(abar > 0.0, "predict_x0: alpha_bar is zero at level " + std::to_string(level));
    float inv_sqrt = static_cast<float>(1.0 / std::sqrt(abar));
    float noise_w = static_cast<float>(std::sqrt(1.0 - abar));
    LatentImage out = z;
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = (z.data[i] - noise_w * eps.data[i]) * inv_sqrt;
    }
    return out;
}

// One deterministic denoising step: level -> level - 1.
inline LatentImage sample_step(const LatentImage& z, const LatentImage& eps, int level,
                               const NoiseSchedule& sched) {
    require(level >= 1 && level <= sched.steps,
            "sample_step: level " + std::to_string(level) + " has no predecessor");
    detail::check_step_shapes(z, eps);
    LatentImage x0 = predict_x0(z, eps, level, sched);
    double abar_prev = sched.at(level - 1);
    float signal_w = static_cast<float>(std::sqrt(abar_prev));
    float noise_w = static_cast<float>(std::sqrt(1.0 - abar_prev));
    LatentImage out = z;
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = signal_w * x0.data[i] + noise_w * eps.data[i];
    }
    return out;
}

// One deterministic noising step: level -> level + 1.
inline LatentImage invert_step(const LatentImage& z, const LatentImage& eps, int level,
                               const NoiseSchedule& sched) {
    require(level >= 0 && level < sched.steps,
            "invert_step: level " + std::to_string(level) + " has no successor");
    detail::check_step_shapes(z, eps);
    LatentImage x0 = predict_x0(z, eps, level, sched);
    double abar_next = sched.at(level + 1);
    float signal_w = static_cast<float>(std::sqrt(abar_next));
    float noise_w = static_cast<float>(std::sqrt(1.0 - abar_next));
    LatentImage out = z;
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = signal_w * x0.data[i] + noise_w * eps.data[i];
    }
    return out;
}

}  // namespace texrect
