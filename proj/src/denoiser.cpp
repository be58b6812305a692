#include "diffaudit/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffaudit/errors.hpp"
#include "diffaudit/parallel.hpp"
#include "diffaudit/rng.hpp"

namespace diffaudit {

void timestep_embedding(int t, int dim, std::span<double> out) {
    if (dim < 2 || dim % 2 != 0) throw ConfigError("timestep_embedding: dim must be even and >= 2");
    const int half = dim / 2;
    const double log_max_period = std::log(10000.0);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-log_max_period * static_cast<double>(i) / half);
        const double angle = static_cast<double>(t) * freq;
        out[2 * i] = std::sin(angle);
        out[2 * i + 1] = std::cos(angle);
    }
}

std::size_t Denoiser::param_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + b3.size();
}

Denoiser Denoiser::init(int height, int width, int channels, int embed_dim, int hidden_dim,
                        std::uint64_t seed) {
    if (height < 1 || width < 1 || channels < 1) throw ConfigError("Denoiser::init: bad image shape");
    if (hidden_dim < 1) throw ConfigError("Denoiser::init: hidden_dim must be >= 1");
    if (embed_dim < 2 || embed_dim % 2 != 0) {
        throw ConfigError("Denoiser::init: embed_dim must be even and >= 2");
    }
    Denoiser m;
    m.height = height;
    m.width = width;
    m.channels = channels;
    m.embed_dim = embed_dim;
    m.hidden_dim = hidden_dim;
    const int in = m.in_features();
    const int d = m.input_dim();
    m.w1.resize(static_cast<std::size_t>(hidden_dim) * in);
    m.b1.assign(hidden_dim, 0.0);
    m.w2.resize(static_cast<std::size_t>(hidden_dim) * hidden_dim);
    m.b2.assign(hidden_dim, 0.0);
    m.w3.resize(static_cast<std::size_t>(d) * hidden_dim);
    m.b3.assign(d, 0.0);

    Rng rng(hash_combine(seed, 0xB00757A97ULL));
    auto fill = [&rng](std::vector<double>& w, int fan_in) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w) v = scale * rng.next_gaussian();
    };
    fill(m.w1, in);
    fill(m.w2, hidden_dim);
    fill(m.w3, hidden_dim);
    return m;
}

void Denoiser::make_scratch(DenoiserScratch& s) const {
    s.input.resize(in_features());
    s.h1.resize(hidden_dim);
    s.h2.resize(hidden_dim);
    s.out.resize(input_dim());
    s.d_out.resize(input_dim());
    s.d_h1.resize(hidden_dim);
    s.d_h2.resize(hidden_dim);
}

namespace {

// y = W x + b with W row-major [rows][cols].
void affine(const double* w, const double* b, const double* x, int rows, int cols, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* row = w + static_cast<std::size_t>(r) * cols;
        double acc = b[r];
        for (int c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void tanh_inplace(double* v, int n) {
    for (int i = 0; i < n; ++i) v[i] = std::tanh(v[i]);
}

// Accumulates dW += dy x^T, db += dy and computes dx = W^T dy (dx may be
// null when the input gradient is not needed).
void affine_backward(const double* w, const double* x, const double* dy, int rows, int cols,
                     double* dw, double* db, double* dx) {
    if (dx) std::fill(dx, dx + cols, 0.0);
    for (int r = 0; r < rows; ++r) {
        const double g = dy[r];
        db[r] += g;
        const double* w_row = w + static_cast<std::size_t>(r) * cols;
        double* dw_row = dw + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) dw_row[c] += g * x[c];
        if (dx) {
            for (int c = 0; c < cols; ++c) dx[c] += g * w_row[c];
        }
    }
}

}  // namespace

void Denoiser::predict(std::span<const double> xt, int t, std::span<double> eps_out,
                       DenoiserScratch& s) const {
    const int d = input_dim();
    if (static_cast<int>(xt.size()) != d || static_cast<int>(eps_out.size()) != d) {
        throw DataError("Denoiser::predict: input size does not match model shape");
    }
    std::copy(xt.begin(), xt.end(), s.input.begin());
    timestep_embedding(t, embed_dim, std::span<double>(s.input).subspan(d, embed_dim));
    affine(w1.data(), b1.data(), s.input.data(), hidden_dim, in_features(), s.h1.data());
    tanh_inplace(s.h1.data(), hidden_dim);
    affine(w2.data(), b2.data(), s.h1.data(), hidden_dim, hidden_dim, s.h2.data());
    tanh_inplace(s.h2.data(), hidden_dim);
    affine(w3.data(), b3.data(), s.h2.data(), d, hidden_dim, eps_out.data());
}

void Denoiser::predict(std::span<const double> xt, int t, std::span<double> eps_out) const {
    DenoiserScratch s;
    make_scratch(s);
    predict(xt, t, eps_out, s);
}

Image Denoiser::predict(const Image& xt, int t) const {
    Image out(xt.height, xt.width, xt.channels);
    predict(xt.pixels, t, out.pixels);
    return out;
}

bool Denoiser::finite() const {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(w1) && ok(b1) && ok(w2) && ok(b2) && ok(w3) && ok(b3);
}

std::vector<double> Denoiser::flatten_params() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (const auto* block : {&w1, &b1, &w2, &b2, &w3, &b3}) {
        flat.insert(flat.end(), block->begin(), block->end());
    }
    return flat;
}

void Denoiser::unflatten_params(std::span<const double> flat) {
    if (flat.size() != param_count()) throw DataError("unflatten_params: size mismatch");
    std::size_t off = 0;
    for (auto* block : {&w1, &b1, &w2, &b2, &w3, &b3}) {
        std::copy(flat.begin() + off, flat.begin() + off + block->size(), block->begin());
        off += block->size();
    }
}

namespace {

// Per-sample forward/backward; gradients are accumulated (not overwritten)
// into the flat buffer. Returns the per-pixel MSE of this sample.
double sample_loss_grad(const Denoiser& m, const NoiseSchedule& sched, const NoiseSample& s,
                        DenoiserScratch& ws, double* grad) {
    const int d = m.input_dim();
    const int in = m.in_features();
    const int h = m.hidden_dim;
    if (s.t < 1 || s.t > sched.timesteps) throw ConfigError("training sample timestep out of range");
    if (!s.x0->same_shape(*s.eps) || static_cast<int>(s.x0->size()) != d) {
        throw DataError("training sample shape mismatch");
    }

    const double sab = std::sqrt(sched.alpha_bar_at(s.t));
    const double somab = std::sqrt(1.0 - sched.alpha_bar_at(s.t));
    for (int i = 0; i < d; ++i) ws.input[i] = sab * s.x0->pixels[i] + somab * s.eps->pixels[i];
    timestep_embedding(s.t, m.embed_dim, std::span<double>(ws.input).subspan(d, m.embed_dim));

    affine(m.w1.data(), m.b1.data(), ws.input.data(), h, in, ws.h1.data());
    tanh_inplace(ws.h1.data(), h);
    affine(m.w2.data(), m.b2.data(), ws.h1.data(), h, h, ws.h2.data());
    tanh_inplace(ws.h2.data(), h);
    affine(m.w3.data(), m.b3.data(), ws.h2.data(), d, h, ws.out.data());

    double loss = 0.0;
    const double inv_d = 1.0 / static_cast<double>(d);
    for (int i = 0; i < d; ++i) {
        const double diff = ws.out[i] - s.eps->pixels[i];
        loss += diff * diff;
        ws.d_out[i] = 2.0 * inv_d * diff;
    }
    loss *= inv_d;

    double* g_w1 = grad;
    double* g_b1 = g_w1 + static_cast<std::size_t>(h) * in;
    double* g_w2 = g_b1 + h;
    double* g_b2 = g_w2 + static_cast<std::size_t>(h) * h;
    double* g_w3 = g_b2 + h;
    double* g_b3 = g_w3 + static_cast<std::size_t>(d) * h;

    affine_backward(m.w3.data(), ws.h2.data(), ws.d_out.data(), d, h, g_w3, g_b3, ws.d_h2.data());
    for (int i = 0; i < h; ++i) ws.d_h2[i] *= 1.0 - ws.h2[i] * ws.h2[i];
    affine_backward(m.w2.data(), ws.h1.data(), ws.d_h2.data(), h, h, g_w2, g_b2, ws.d_h1.data());
    for (int i = 0; i < h; ++i) ws.d_h1[i] *= 1.0 - ws.h1[i] * ws.h1[i];
    affine_backward(m.w1.data(), ws.input.data(), ws.d_h1.data(), h, in, g_w1, g_b1, nullptr);
    return loss;
}

}  // namespace

double loss_and_gradient(const Denoiser& model, const NoiseSchedule& sched,
                         std::span<const NoiseSample> batch, std::vector<double>& grad) {
    if (batch.empty()) throw DataError("loss_and_gradient: empty batch");
    grad.assign(model.param_count(), 0.0);
    DenoiserScratch ws;
    model.make_scratch(ws);
    double loss = 0.0;
    for (const auto& s : batch) loss += sample_loss_grad(model, sched, s, ws, grad.data());
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= inv_n;
    return loss * inv_n;
}

TrainResult train(std::span<const Image> train_images, const NoiseSchedule& sched,
                  const TrainConfig& config) {
    if (train_images.empty()) throw DataError("train: training split is empty");
    if (config.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    for (const auto& img : train_images) {
        if (!img.same_shape(train_images.front())) throw DataError("train: mixed image shapes");
    }

    const auto& shape = train_images.front();
    Denoiser model = Denoiser::init(shape.height, shape.width, shape.channels, config.embed_dim,
                                    config.hidden_dim, config.seed);
    const std::size_t n = train_images.size();
    const std::size_t p = model.param_count();

    // Gradients are accumulated per fixed chunk and reduced in chunk order,
    // which keeps the result identical for any worker count.
    const std::size_t n_chunks = std::min<std::size_t>(8, n);
    std::vector<std::vector<double>> chunk_grad(n_chunks, std::vector<double>(p));
    std::vector<double> chunk_loss(n_chunks);
    std::vector<DenoiserScratch> scratch(n_chunks);
    for (auto& ws : scratch) model.make_scratch(ws);

    std::vector<double> grad(p), m_state(p, 0.0), v_state(p, 0.0);
    std::vector<double> flat = model.flatten_params();
    model.unflatten_params(flat);  // keep blocks and flat view in sync

    TrainResult result;
    result.loss_curve.reserve(config.epochs);

    const int T = sched.timesteps;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        parallel_for(n_chunks, config.workers, [&](std::size_t chunk) {
            const std::size_t begin = chunk * n / n_chunks;
            const std::size_t end = (chunk + 1) * n / n_chunks;
            auto& g = chunk_grad[chunk];
            std::fill(g.begin(), g.end(), 0.0);
            double loss = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                Rng rng(hash_combine(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)),
                                     0xA11CE000ULL + i));
                const int t = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(T)));
                Image eps = gaussian_image(shape.height, shape.width, shape.channels, rng);
                NoiseSample s{&train_images[i], t, &eps};
                loss += sample_loss_grad(model, sched, s, scratch[chunk], g.data());
            }
            chunk_loss[chunk] = loss;
        });

        double epoch_loss = 0.0;
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t c = 0; c < n_chunks; ++c) {
            epoch_loss += chunk_loss[c];
            const auto& g = chunk_grad[c];
            for (std::size_t i = 0; i < p; ++i) grad[i] += g[i];
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        epoch_loss *= inv_n;
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));
        }
        result.loss_curve.push_back(epoch_loss);

        const double step = static_cast<double>(epoch + 1);
        const double bc1 = 1.0 - std::pow(config.adam_beta1, step);
        const double bc2 = 1.0 - std::pow(config.adam_beta2, step);
        for (std::size_t i = 0; i < p; ++i) {
            const double g = grad[i] * inv_n;
            m_state[i] = config.adam_beta1 * m_state[i] + (1.0 - config.adam_beta1) * g;
            v_state[i] = config.adam_beta2 * v_state[i] + (1.0 - config.adam_beta2) * g * g;
            const double m_hat = m_state[i] / bc1;
            const double v_hat = v_state[i] / bc2;
            flat[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        }
        model.unflatten_params(flat);
    }

    result.model = std::move(model);
    return result;
}

TrainResult train(const FaceDataset& dataset, const NoiseSchedule& sched, const TrainConfig& config) {
    std::vector<Image> images;
    for (const auto& e : dataset.entries) {
        if (e.split == Split::train) images.push_back(e.image);
    }
    if (images.empty()) throw DataError("train: dataset has an empty training split");
    return train(images, sched, config);
}

}  // namespace diffaudit
