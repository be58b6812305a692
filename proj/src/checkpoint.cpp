#include "diffaudit/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "diffaudit/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace diffaudit {

namespace {

constexpr char kMagic[4] = {'D', 'F', 'A', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw DataError("load_checkpoint: truncated file " + path);
    }
    return v;
}

double read_f64(std::ifstream& in, const std::string& path) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw DataError("load_checkpoint: truncated file " + path);
    }
    return v;
}

}  // namespace

void save_checkpoint(const Denoiser& model, const NoiseSchedule& sched, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(sched.timesteps));
    write_f64(out, sched.beta_min);
    write_f64(out, sched.beta_max);
    write_u32(out, static_cast<std::uint32_t>(model.height));
    write_u32(out, static_cast<std::uint32_t>(model.width));
    write_u32(out, static_cast<std::uint32_t>(model.channels));
    write_u32(out, static_cast<std::uint32_t>(model.embed_dim));
    write_u32(out, static_cast<std::uint32_t>(model.hidden_dim));
    for (const auto* block : {&model.w1, &model.b1, &model.w2, &model.b2, &model.w3, &model.b3}) {
        out.write(reinterpret_cast<const char*>(block->data()),
                  static_cast<std::streamsize>(block->size() * sizeof(double)));
    }
    if (!out) throw DataError("save_checkpoint: write failed for " + path);
}

std::pair<Denoiser, NoiseSchedule> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("load_checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = read_u32(in, path);
    if (version != kVersion) {
        throw DataError("load_checkpoint: unsupported format version " + std::to_string(version) +
                        " in " + path);
    }
    const auto T = static_cast<int>(read_u32(in, path));
    const double beta_min = read_f64(in, path);
    const double beta_max = read_f64(in, path);
    NoiseSchedule sched = make_linear_schedule(T, beta_min, beta_max);

    const auto height = static_cast<int>(read_u32(in, path));
    const auto width = static_cast<int>(read_u32(in, path));
    const auto channels = static_cast<int>(read_u32(in, path));
    const auto embed_dim = static_cast<int>(read_u32(in, path));
    const auto hidden_dim = static_cast<int>(read_u32(in, path));
    Denoiser model = Denoiser::init(height, width, channels, embed_dim, hidden_dim, 0);
    for (auto* block : {&model.w1, &model.b1, &model.w2, &model.b2, &model.w3, &model.b3}) {
        if (!in.read(reinterpret_cast<char*>(block->data()),
                     static_cast<std::streamsize>(block->size() * sizeof(double)))) {
            throw DataError("load_checkpoint: truncated parameters in " + path);
        }
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError("load_checkpoint: trailing bytes in " + path);
    if (!model.finite()) throw NumericError("load_checkpoint: non-finite parameters in " + path);
    return {std::move(model), std::move(sched)};
}

void save_loss_csv(const std::vector<double>& loss_curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_loss_csv: cannot open " + path);
    out << "epoch,loss\n";
    char buf[40];
    for (std::size_t i = 0; i < loss_curve.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", loss_curve[i]);
        out << i << "," << buf << "\n";
    }
}

}  // namespace diffaudit
