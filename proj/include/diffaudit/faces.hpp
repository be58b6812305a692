#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "diffaudit/image.hpp"

namespace diffaudit {

// Pixel-coordinate rectangle, top-left inclusive, bottom-right exclusive.
struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    bool within(int frame_w, int frame_h) const {
        return x0 >= 0 && y0 >= 0 && x1 <= frame_w && y1 <= frame_h && !empty();
    }
    bool intersects(const Box& o) const {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }
    bool operator==(const Box&) const = default;
};

// The eight named facial regions every attack draws its masks from.
struct LandmarkMap {
    Box left_eye, right_eye, nose, mouth, forehead, left_cheek, right_cheek, chin;

    static constexpr std::array<std::string_view, 8> names = {
        "left_eye", "right_eye", "nose", "mouth", "forehead", "left_cheek", "right_cheek", "chin"};

    const Box& get(std::string_view name) const;
    Box& get(std::string_view name);
    bool operator==(const LandmarkMap&) const = default;
};

// Throws DataError unless all eight boxes are non-empty and inside the
// frame and the feature boxes (eyes, nose, mouth) are pairwise disjoint.
void validate_landmarks(const LandmarkMap& lm, int frame_w, int frame_h, const std::string& context);

// Generative parameters of one synthetic person. Positions and sizes are in
// relative [0,1] coordinates; intensities in [0,1].
struct FaceIdentity {
    int id = 0;
    double face_cx, face_cy, face_ax, face_ay;
    double eye_y, eye_dx, eye_r;
    double nose_apex_y, nose_base_y, nose_half_w;
    double mouth_y, mouth_half_w, mouth_half_h;
    double skin, eye_shade, nose_shade, mouth_shade, background;
};

// Deterministic identity parameters for (id, seed), inside the documented
// ranges that keep all landmarks in frame at the default jitter.
FaceIdentity sample_identity(int id, std::uint64_t corpus_seed);

// Deterministic render of one face variant. jitter perturbs positions and
// intensities to simulate different photos of the same person; it must be
// small enough that every landmark stays inside the frame (DataError
// otherwise). Minimum supported frame is 24x24.
std::pair<Image, LandmarkMap> render_identity(const FaceIdentity& identity, int height, int width,
                                              int channels, std::uint64_t variation_seed,
                                              double jitter);

enum class Split { train, hold };
enum class SplitMode { image_level, identity_disjoint };

std::string to_string(Split s);
std::string to_string(SplitMode m);
Split split_from_string(const std::string& s);
SplitMode split_mode_from_string(const std::string& s);

struct DatasetEntry {
    Image image;
    int identity_id = 0;
    LandmarkMap landmarks;
    Split split = Split::train;
    std::string filename;
};

// Present only for datasets produced by generate_dataset; lets experiments
// render fresh query images of known identities without touching the
// persisted corpus.
struct GenerationMeta {
    bool available = false;
    std::uint64_t seed = 0;
    int n_identities = 0;
    int images_per_identity = 0;
    double jitter = 0.0;
};

struct FaceDataset {
    int height = 0, width = 0, channels = 0;
    SplitMode split_mode = SplitMode::image_level;
    std::vector<DatasetEntry> entries;
    GenerationMeta gen;

    std::vector<std::size_t> split_indices(Split s) const;
    std::vector<int> identity_ids(Split s) const;  // distinct, ascending
};

// Seed of the j-th render of an identity; generation uses j in
// [0, images_per_identity), query rendering uses larger j.
std::uint64_t variation_seed(std::uint64_t corpus_seed, int identity_id, int image_index);

FaceDataset generate_dataset(int n_identities, int images_per_identity, int height, int width,
                             int channels, double split_fraction, SplitMode mode,
                             std::uint64_t seed, double jitter = 0.05);

// Directory layout: images/*.pgm (P5) or *.ppm (P6), labels.csv
// (filename,identity_id,split), landmarks.json (per-file named boxes).
void save_dataset(const FaceDataset& ds, const std::string& dir);
FaceDataset load_dataset(const std::string& dir);

// Loads unlabeled portable pixmaps with a caller-supplied landmark sidecar
// (same JSON schema as landmarks.json). Every image must have an entry.
FaceDataset load_external_images(const std::string& dir, const std::string& landmark_sidecar);

}  // namespace diffaudit
