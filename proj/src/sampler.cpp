#include "diffaudit/sampler.hpp"

#include <cmath>
#include <string>

#include "diffaudit/errors.hpp"
#include "diffaudit/rng.hpp"

namespace diffaudit {

SamplerConfig resolve_sampler(const SamplerConfig& config, int timesteps) {
    SamplerConfig r = config;
    if (r.t_start == 0) r.t_start = std::max(1, timesteps / 2);
    if (r.record_every == 0) r.record_every = std::max(1, r.t_start / 25);
    if (r.t_start < 1 || r.t_start > timesteps) {
        throw ConfigError("sampler: t_start " + std::to_string(r.t_start) + " outside [1, " +
                          std::to_string(timesteps) + "]");
    }
    if (r.record_every < 1) throw ConfigError("sampler: record_every must be >= 1");
    return r;
}

namespace {

void check_t(int t, const NoiseSchedule& sched, const char* where) {
    if (t < 1 || t > sched.timesteps) {
        throw ConfigError(std::string(where) + ": timestep " + std::to_string(t) + " outside [1, " +
                          std::to_string(sched.timesteps) + "]");
    }
}

}  // namespace

Image forward_noise(const Image& x0, int t, const Image& eps, const NoiseSchedule& sched) {
    check_t(t, sched, "forward_noise");
    if (!x0.same_shape(eps)) throw DataError("forward_noise: x0 and eps shapes differ");
    const double sab = std::sqrt(sched.alpha_bar_at(t));
    const double somab = std::sqrt(1.0 - sched.alpha_bar_at(t));
    Image out(x0.height, x0.width, x0.channels);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = sab * x0.pixels[i] + somab * eps.pixels[i];
    }
    return out;
}

Image predict_x0_from_eps(const Image& xt, int t, const Image& eps_hat, const NoiseSchedule& sched) {
    check_t(t, sched, "predict_x0");
    if (!xt.same_shape(eps_hat)) throw DataError("predict_x0: eps_hat shape differs from xt");
    const double inv_sab = 1.0 / std::sqrt(sched.alpha_bar_at(t));
    const double somab = std::sqrt(1.0 - sched.alpha_bar_at(t));
    Image out(xt.height, xt.width, xt.channels);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = (xt.pixels[i] - somab * eps_hat.pixels[i]) * inv_sab;
    }
    return out;
}

Image predict_x0(const Image& xt, int t, const Denoiser& model, const NoiseSchedule& sched) {
    check_t(t, sched, "predict_x0");
    return predict_x0_from_eps(xt, t, model.predict(xt, t), sched);
}

Image reverse_step_from_eps(const Image& xt, int t, const Image& eps_hat, const NoiseSchedule& sched,
                            const SamplerConfig& config) {
    check_t(t, sched, "reverse_step");
    if (!xt.same_shape(eps_hat)) throw DataError("reverse_step: eps_hat shape differs from xt");
    Image out(xt.height, xt.width, xt.channels);
    if (config.kind == SamplerKind::ancestral) {
        const double post_var = sched.posterior_var_at(t);
        const double inv_sa = 1.0 / std::sqrt(sched.alpha_at(t));
        const double coeff = post_var / std::sqrt(1.0 - sched.alpha_bar_at(t));
        for (std::size_t i = 0; i < out.pixels.size(); ++i) {
            out.pixels[i] = inv_sa * (xt.pixels[i] - coeff * eps_hat.pixels[i]);
        }
        if (t > 1) {
            const double sigma = std::sqrt(post_var);
            Rng rng(hash_combine(config.rng_seed, 0x5A5A0000ULL + static_cast<std::uint64_t>(t)));
            for (double& p : out.pixels) p += sigma * rng.next_gaussian();
        }
    } else {
        const double sab_prev = std::sqrt(sched.alpha_bar_prev(t));
        const double somab_prev = std::sqrt(1.0 - sched.alpha_bar_prev(t));
        const Image x0_hat = predict_x0_from_eps(xt, t, eps_hat, sched);
        for (std::size_t i = 0; i < out.pixels.size(); ++i) {
            out.pixels[i] = sab_prev * x0_hat.pixels[i] + somab_prev * eps_hat.pixels[i];
        }
    }
    return out;
}

Image reverse_step(const Image& xt, int t, const Denoiser& model, const NoiseSchedule& sched,
                   const SamplerConfig& config) {
    check_t(t, sched, "reverse_step");
    return reverse_step_from_eps(xt, t, model.predict(xt, t), sched, config);
}

std::vector<TrajectoryPoint> reconstruct_trajectory(const Image& xq, const PixelMask& mask,
                                                    const Denoiser& model, const NoiseSchedule& sched,
                                                    const SamplerConfig& config) {
    const SamplerConfig cfg = resolve_sampler(config, sched.timesteps);
    Image x = apply_mask(xq, mask);

    Rng eps_rng(hash_combine(cfg.rng_seed, 0xF0A9A9D0ULL));
    const Image eps = gaussian_image(x.height, x.width, x.channels, eps_rng);
    x = forward_noise(x, cfg.t_start, eps, sched);

    std::vector<TrajectoryPoint> points;
    points.reserve(static_cast<std::size_t>(cfg.t_start / cfg.record_every) + 1);
    Image eps_hat(x.height, x.width, x.channels);
    DenoiserScratch scratch;
    model.make_scratch(scratch);
    for (int t = cfg.t_start; t >= 1; --t) {
        model.predict(x.pixels, t, eps_hat.pixels, scratch);
        if ((cfg.t_start - t) % cfg.record_every == 0) {
            points.push_back({t, predict_x0_from_eps(x, t, eps_hat, sched)});
        }
        x = reverse_step_from_eps(x, t, eps_hat, sched, cfg);
    }
    return points;
}

Image reconstruct_final(const Image& xq, const PixelMask& mask, const Denoiser& model,
                        const NoiseSchedule& sched, const SamplerConfig& config) {
    const SamplerConfig cfg = resolve_sampler(config, sched.timesteps);
    Image x = apply_mask(xq, mask);
    Rng eps_rng(hash_combine(cfg.rng_seed, 0xF0A9A9D0ULL));
    const Image eps = gaussian_image(x.height, x.width, x.channels, eps_rng);
    x = forward_noise(x, cfg.t_start, eps, sched);

    Image eps_hat(x.height, x.width, x.channels);
    DenoiserScratch scratch;
    model.make_scratch(scratch);
    for (int t = cfg.t_start; t >= 1; --t) {
        model.predict(x.pixels, t, eps_hat.pixels, scratch);
        x = reverse_step_from_eps(x, t, eps_hat, sched, cfg);
    }
    return x;
}

}  // namespace diffaudit
