#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "diffaudit/faces.hpp"
#include "diffaudit/image.hpp"
#include "diffaudit/schedule.hpp"

namespace diffaudit {

// Sinusoidal embedding of an integer timestep; dim must be even and >= 2.
void timestep_embedding(int t, int dim, std::span<double> out);

struct DenoiserScratch {
    std::vector<double> input, h1, h2, out, d_out, d_h1, d_h2;
};

// Noise-prediction network: flattened image concatenated with a sinusoidal
// timestep embedding, two tanh hidden layers, linear output of image size.
// Deliberately small enough that the backward pass is hand-checkable.
struct Denoiser {
    int height = 0, width = 0, channels = 0;
    int embed_dim = 32;
    int hidden_dim = 256;
    // Row-major weights, declaration order = serialization order.
    std::vector<double> w1, b1, w2, b2, w3, b3;

    int input_dim() const { return height * width * channels; }
    int in_features() const { return input_dim() + embed_dim; }
    std::size_t param_count() const;

    static Denoiser init(int height, int width, int channels, int embed_dim, int hidden_dim,
                         std::uint64_t seed);

    // eps_out = predicted noise for the (unclamped) state xt at timestep t.
    // Read-only and safe to call concurrently with per-caller scratch.
    void predict(std::span<const double> xt, int t, std::span<double> eps_out,
                 DenoiserScratch& scratch) const;
    void predict(std::span<const double> xt, int t, std::span<double> eps_out) const;
    Image predict(const Image& xt, int t) const;

    void make_scratch(DenoiserScratch& s) const;
    bool finite() const;

    // Flat parameter access in declaration order (checkpoints, optimizer,
    // finite-difference tests).
    std::vector<double> flatten_params() const;
    void unflatten_params(std::span<const double> flat);
};

struct NoiseSample {
    const Image* x0 = nullptr;
    int t = 0;
    const Image* eps = nullptr;
};

// Mean over the batch of the per-pixel MSE between eps and the prediction
// at x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps. grad receives the analytic
// gradient in flat declaration order (resized and zeroed inside).
double loss_and_gradient(const Denoiser& model, const NoiseSchedule& sched,
                         std::span<const NoiseSample> batch, std::vector<double>& grad);

struct TrainConfig {
    int epochs = 2000;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int embed_dim = 32;
    int hidden_dim = 256;
    std::uint64_t seed = 0;
    int workers = 1;
};

struct TrainResult {
    Denoiser model;
    std::vector<double> loss_curve;  // per-epoch mean loss
};

// Full-batch Adam on the noise-prediction objective; one (t, eps) draw per
// image per epoch. Deterministic given the seed, independent of workers.
// Throws NumericError if the loss stops being finite.
TrainResult train(std::span<const Image> train_images, const NoiseSchedule& sched,
                  const TrainConfig& config);
TrainResult train(const FaceDataset& dataset, const NoiseSchedule& sched, const TrainConfig& config);

}  // namespace diffaudit
