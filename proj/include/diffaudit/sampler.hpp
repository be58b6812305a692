#pragma once

#include <cstdint>
#include <vector>

#include "diffaudit/denoiser.hpp"
#include "diffaudit/image.hpp"
#include "diffaudit/masks.hpp"
#include "diffaudit/schedule.hpp"

namespace diffaudit {

enum class SamplerKind { ancestral, deterministic };

struct SamplerConfig {
    SamplerKind kind = SamplerKind::deterministic;
    int t_start = 0;       // 0 -> T/2
    int record_every = 0;  // 0 -> max(1, t_start / 25)
    std::uint64_t rng_seed = 0;
};

// Fills the t_start / record_every defaults and validates ranges.
SamplerConfig resolve_sampler(const SamplerConfig& config, int timesteps);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps; the caller supplies eps so
// sampling stays deterministic.
Image forward_noise(const Image& x0, int t, const Image& eps, const NoiseSchedule& sched);

// One-step clean estimate (x_t - sqrt(1-abar_t) eps_hat) / sqrt(abar_t).
Image predict_x0(const Image& xt, int t, const Denoiser& model, const NoiseSchedule& sched);
Image predict_x0_from_eps(const Image& xt, int t, const Image& eps_hat, const NoiseSchedule& sched);

// Single reverse-process update x_t -> x_{t-1}. The ancestral step draws
// z_t from (rng_seed, t) and adds no noise at t=1; the deterministic step
// is the eta=0 update from the predicted x0.
Image reverse_step(const Image& xt, int t, const Denoiser& model, const NoiseSchedule& sched,
                   const SamplerConfig& config);
Image reverse_step_from_eps(const Image& xt, int t, const Image& eps_hat, const NoiseSchedule& sched,
                            const SamplerConfig& config);

struct TrajectoryPoint {
    int t = 0;
    Image x0_estimate;
};

// Masks the query, forward-noises it to t_start, then walks the reverse
// chain down to t=1, recording the one-step x0 estimate at t_start,
// t_start - record_every, ... . Points are ordered by decreasing t.
std::vector<TrajectoryPoint> reconstruct_trajectory(const Image& xq, const PixelMask& mask,
                                                    const Denoiser& model, const NoiseSchedule& sched,
                                                    const SamplerConfig& config);

// Same reverse walk without recording; returns the clean output of the
// final (t=1) step.
Image reconstruct_final(const Image& xq, const PixelMask& mask, const Denoiser& model,
                        const NoiseSchedule& sched, const SamplerConfig& config);

}  // namespace diffaudit
