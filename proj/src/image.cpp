#include "diffaudit/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "diffaudit/errors.hpp"

namespace diffaudit {

double rmse(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw DataError("rmse: image shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.pixels.size()));
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw DataError("mean_abs_diff: image shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) acc += std::fabs(a.pixels[i] - b.pixels[i]);
    return acc / static_cast<double>(a.pixels.size());
}

Image clamp01(const Image& img) {
    Image out = img;
    for (double& p : out.pixels) p = std::clamp(p, 0.0, 1.0);
    return out;
}

Image gaussian_image(int h, int w, int c, Rng& rng) {
    Image out(h, w, c);
    for (double& p : out.pixels) p = rng.next_gaussian();
    return out;
}

std::uint64_t content_hash(const Image& img) {
    std::uint64_t h = hash_combine(hash_combine(static_cast<std::uint64_t>(img.height),
                                                static_cast<std::uint64_t>(img.width)),
                                   static_cast<std::uint64_t>(img.channels));
    if (!img.pixels.empty()) {
        h = hash_combine(h, hash_bytes(img.pixels.data(), img.pixels.size() * sizeof(double)));
    }
    return h;
}

void write_pnm(const Image& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3) {
        throw DataError("write_pnm: only 1- or 3-channel images supported: " + path);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_pnm: cannot open " + path);
    out << (img.channels == 1 ? "P5" : "P6") << "\n"
        << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                const double v = std::clamp(img.at(y, x, c), 0.0, 1.0);
                row[static_cast<std::size_t>(x) * img.channels + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("write_pnm: write failed for " + path);
}

namespace {

int read_pnm_token(std::istream& in, const std::string& path) {
    // Skips whitespace and '#' comments between header fields.
    int ch = in.get();
    while (ch == '#' || std::isspace(ch)) {
        if (ch == '#') {
            while (ch != '\n' && ch != EOF) ch = in.get();
        }
        ch = in.get();
    }
    int value = 0;
    bool any = false;
    while (ch >= '0' && ch <= '9') {
        value = value * 10 + (ch - '0');
        any = true;
        ch = in.get();
    }
    if (!any) throw DataError("read_pnm: malformed header in " + path);
    return value;
}

}  // namespace

Image read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("read_pnm: cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    int channels = 0;
    if (magic[0] == 'P' && magic[1] == '5') channels = 1;
    else if (magic[0] == 'P' && magic[1] == '6') channels = 3;
    else throw DataError("read_pnm: not a binary PGM/PPM file: " + path);

    const int width = read_pnm_token(in, path);
    const int height = read_pnm_token(in, path);
    const int maxval = read_pnm_token(in, path);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
        throw DataError("read_pnm: unsupported header in " + path);
    }
    Image img(height, width, channels);
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw DataError("read_pnm: truncated pixel data in " + path);
    }
    const double scale = 1.0 / static_cast<double>(maxval);
    for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] * scale;
    return img;
}

}  // namespace diffaudit
