#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffaudit/rng.hpp"

namespace diffaudit {

// Dense H x W x C intensity array, row-major with interleaved channels.
// Source-dataset pixels live in [0, 1]; intermediate diffusion states are
// unclamped and may leave that range. Clamping happens only at export.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, 0.0) {}

    static Image zeros(int h, int w, int c) { return Image(h, w, c); }

    std::size_t size() const { return pixels.size(); }

    double& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }
};

// Root-mean-square difference over all pixels; shapes must match.
double rmse(const Image& a, const Image& b);

// Mean absolute per-pixel difference.
double mean_abs_diff(const Image& a, const Image& b);

Image clamp01(const Image& img);

// Image filled with i.i.d. standard normal values.
Image gaussian_image(int h, int w, int c, Rng& rng);

// Stable 64-bit hash of shape + pixel bit patterns.
std::uint64_t content_hash(const Image& img);

// Binary PGM (P5, channels == 1) / PPM (P6, channels == 3), maxval 255.
// Values are clamped to [0,1] and quantized on write, rescaled on read.
void write_pnm(const Image& img, const std::string& path);
Image read_pnm(const std::string& path);

}  // namespace diffaudit
