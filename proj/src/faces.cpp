#include "diffaudit/faces.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "diffaudit/errors.hpp"
#include "diffaudit/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace diffaudit {

const Box& LandmarkMap::get(std::string_view name) const {
    return const_cast<LandmarkMap*>(this)->get(name);
}

Box& LandmarkMap::get(std::string_view name) {
    if (name == "left_eye") return left_eye;
    if (name == "right_eye") return right_eye;
    if (name == "nose") return nose;
    if (name == "mouth") return mouth;
    if (name == "forehead") return forehead;
    if (name == "left_cheek") return left_cheek;
    if (name == "right_cheek") return right_cheek;
    if (name == "chin") return chin;
    throw DataError("unknown landmark name: " + std::string(name));
}

void validate_landmarks(const LandmarkMap& lm, int frame_w, int frame_h, const std::string& context) {
    for (const auto name : LandmarkMap::names) {
        const Box& b = lm.get(name);
        if (!b.within(frame_w, frame_h)) {
            throw DataError(context + ": landmark '" + std::string(name) +
                            "' is empty or outside the frame");
        }
    }
    const std::array<std::pair<std::string_view, const Box*>, 4> features = {{
        {"left_eye", &lm.left_eye},
        {"right_eye", &lm.right_eye},
        {"nose", &lm.nose},
        {"mouth", &lm.mouth},
    }};
    for (std::size_t i = 0; i < features.size(); ++i) {
        for (std::size_t j = i + 1; j < features.size(); ++j) {
            if (features[i].second->intersects(*features[j].second)) {
                throw DataError(context + ": landmarks '" + std::string(features[i].first) +
                                "' and '" + std::string(features[j].first) + "' overlap");
            }
        }
    }
}

namespace {

double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.next_double(); }

int px(double rel, int extent) { return static_cast<int>(std::lround(rel * extent)); }

Box clamp_to_frame(Box b, int w, int h) {
    b.x0 = std::clamp(b.x0, 0, w);
    b.x1 = std::clamp(b.x1, 0, w);
    b.y0 = std::clamp(b.y0, 0, h);
    b.y1 = std::clamp(b.y1, 0, h);
    return b;
}

void fill_box(Image& img, const Box& b, double value) {
    for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x)
            for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = value;
}

void fill_ellipse(Image& img, double cx, double cy, double ax, double ay, double value) {
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - ay)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + ay)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - ax)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + ax)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = (x + 0.5 - cx) / ax;
            const double dy = (y + 0.5 - cy) / ay;
            if (dx * dx + dy * dy <= 1.0)
                for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = value;
        }
    }
}

// Downward-pointing wedge: apex at (cx, y_apex), base from (cx-half_w, y_base)
// to (cx+half_w, y_base); drawing is clipped to `clip`.
void fill_nose(Image& img, const Box& clip, double cx, double y_apex, double y_base, double half_w,
               double value) {
    for (int y = clip.y0; y < clip.y1; ++y) {
        const double frac = (y + 0.5 - y_apex) / std::max(1e-9, y_base - y_apex);
        if (frac < 0.0 || frac > 1.0) continue;
        const double w = half_w * frac;
        for (int x = clip.x0; x < clip.x1; ++x) {
            if (std::fabs(x + 0.5 - cx) <= w)
                for (int c = 0; c < img.channels; ++c) img.at(y, x, c) = value;
        }
    }
}

}  // namespace

FaceIdentity sample_identity(int id, std::uint64_t corpus_seed) {
    Rng rng(hash_combine(corpus_seed, 0x1DEA0000ULL + static_cast<std::uint64_t>(id)));
    FaceIdentity f;
    f.id = id;
    f.face_cx = uniform_in(rng, 0.48, 0.52);
    f.face_cy = uniform_in(rng, 0.50, 0.52);
    f.face_ax = uniform_in(rng, 0.36, 0.42);
    f.face_ay = uniform_in(rng, 0.40, 0.44);
    f.eye_y = uniform_in(rng, 0.36, 0.40);
    f.eye_dx = uniform_in(rng, 0.18, 0.21);
    f.eye_r = uniform_in(rng, 0.035, 0.05);
    f.nose_apex_y = uniform_in(rng, 0.44, 0.47);
    f.nose_base_y = uniform_in(rng, 0.54, 0.57);
    f.nose_half_w = uniform_in(rng, 0.035, 0.05);
    f.mouth_y = uniform_in(rng, 0.70, 0.73);
    f.mouth_half_w = uniform_in(rng, 0.08, 0.12);
    f.mouth_half_h = uniform_in(rng, 0.025, 0.04);
    f.skin = uniform_in(rng, 0.65, 0.85);
    f.eye_shade = uniform_in(rng, 0.05, 0.25);
    f.nose_shade = uniform_in(rng, 0.38, 0.52);
    f.mouth_shade = uniform_in(rng, 0.15, 0.35);
    f.background = uniform_in(rng, 0.02, 0.08);
    return f;
}

std::pair<Image, LandmarkMap> render_identity(const FaceIdentity& f, int height, int width,
                                              int channels, std::uint64_t variation_seed,
                                              double jitter) {
    if (height < 24 || width < 24) throw ConfigError("render_identity: minimum frame is 24x24");
    if (channels != 1 && channels != 3) throw ConfigError("render_identity: channels must be 1 or 3");
    if (jitter < 0.0) throw ConfigError("render_identity: jitter must be >= 0");

    Rng rng(hash_combine(hash_combine(0xFACE0000ULL, static_cast<std::uint64_t>(f.id)), variation_seed));

    // One whole-face offset plus smaller per-feature offsets. Horizontal
    // feature jitter is kept small relative to vertical so the analytic
    // eye/nose separation survives the default jitter of 0.05.
    const double gx = uniform_in(rng, -jitter * 0.5, jitter * 0.5);
    const double gy = uniform_in(rng, -jitter * 0.5, jitter * 0.5);
    const double eye_jx = uniform_in(rng, -jitter * 0.25, jitter * 0.25);
    const double eye_jy = uniform_in(rng, -jitter * 0.6, jitter * 0.6);
    const double nose_jx = uniform_in(rng, -jitter * 0.25, jitter * 0.25);
    const double nose_jy = uniform_in(rng, -jitter * 0.4, jitter * 0.4);
    const double mouth_jx = uniform_in(rng, -jitter * 0.25, jitter * 0.25);
    const double mouth_jy = uniform_in(rng, -jitter * 0.4, jitter * 0.4);
    auto shade = [&](double base) {
        return std::clamp(base + uniform_in(rng, -jitter * 0.5, jitter * 0.5), 0.01, 0.99);
    };
    const double skin = shade(f.skin);
    const double eye_shade = shade(f.eye_shade);
    const double nose_shade = shade(f.nose_shade);
    const double mouth_shade = shade(f.mouth_shade);
    const double background = shade(f.background);

    const double cx = (f.face_cx + gx) * width;
    const double cy = (f.face_cy + gy) * height;
    const double ax = f.face_ax * width;
    const double ay = f.face_ay * height;
    const double r = f.eye_r * std::min(width, height);
    const double eye_cy = (f.eye_y + gy + eye_jy) * height;
    const double eye_lx = (f.face_cx + gx - f.eye_dx + eye_jx) * width;
    const double eye_rx = (f.face_cx + gx + f.eye_dx + eye_jx) * width;
    const double nose_cx = (f.face_cx + gx + nose_jx) * width;
    const double nose_apex = (f.nose_apex_y + gy + nose_jy) * height;
    const double nose_base = (f.nose_base_y + gy + nose_jy) * height;
    const double nose_hw = f.nose_half_w * width;
    const double mouth_cx = (f.face_cx + gx + mouth_jx) * width;
    const double mouth_cy = (f.mouth_y + gy + mouth_jy) * height;
    const double mouth_hw = f.mouth_half_w * width;
    const double mouth_hh = f.mouth_half_h * height;

    // Feature boxes first; constructive separation keeps them disjoint.
    const int pad = 1;
    LandmarkMap lm;
    lm.left_eye = {static_cast<int>(std::floor(eye_lx - r)) - pad,
                   static_cast<int>(std::floor(eye_cy - r)) - pad,
                   static_cast<int>(std::ceil(eye_lx + r)) + pad,
                   static_cast<int>(std::ceil(eye_cy + r)) + pad};
    lm.right_eye = {static_cast<int>(std::floor(eye_rx - r)) - pad,
                    static_cast<int>(std::floor(eye_cy - r)) - pad,
                    static_cast<int>(std::ceil(eye_rx + r)) + pad,
                    static_cast<int>(std::ceil(eye_cy + r)) + pad};
    lm.nose = {static_cast<int>(std::floor(nose_cx - nose_hw)) - pad,
               static_cast<int>(std::floor(nose_apex)),
               static_cast<int>(std::ceil(nose_cx + nose_hw)) + pad,
               static_cast<int>(std::ceil(nose_base)) + pad};
    lm.nose.x0 = std::max(lm.nose.x0, lm.left_eye.x1 + 1);
    lm.nose.x1 = std::min(lm.nose.x1, lm.right_eye.x0 - 1);
    lm.mouth = {static_cast<int>(std::floor(mouth_cx - mouth_hw)) - pad,
                static_cast<int>(std::floor(mouth_cy - mouth_hh)) - pad,
                static_cast<int>(std::ceil(mouth_cx + mouth_hw)) + pad,
                static_cast<int>(std::ceil(mouth_cy + mouth_hh)) + pad};
    lm.mouth.y0 = std::max(lm.mouth.y0, lm.nose.y1);

    // Skin regions derived from the feature boxes.
    const int eye_top = std::min(lm.left_eye.y0, lm.right_eye.y0);
    const int eye_bottom = std::max(lm.left_eye.y1, lm.right_eye.y1);
    lm.forehead = {px(f.face_cx + gx - 0.5 * f.face_ax, width),
                   static_cast<int>(std::lround(cy - 0.80 * ay)),
                   px(f.face_cx + gx + 0.5 * f.face_ax, width), eye_top - 1};
    lm.left_cheek = {lm.left_eye.x0, eye_bottom + 1, lm.nose.x0 - 1, lm.mouth.y0 - 1};
    lm.right_cheek = {lm.nose.x1 + 1, eye_bottom + 1, lm.right_eye.x1, lm.mouth.y0 - 1};
    lm.chin = {lm.mouth.x0, lm.mouth.y1 + 1, lm.mouth.x1,
               static_cast<int>(std::lround(cy + 0.92 * ay))};

    for (const auto name : LandmarkMap::names) {
        Box& b = lm.get(name);
        b = clamp_to_frame(b, width, height);
    }
    validate_landmarks(lm, width, height, "render_identity(id=" + std::to_string(f.id) + ")");

    Image img(height, width, channels);
    for (double& p : img.pixels) p = background;
    fill_ellipse(img, cx, cy, ax, ay, skin);
    fill_ellipse(img, eye_lx, eye_cy, r, r, eye_shade);
    fill_ellipse(img, eye_rx, eye_cy, r, r, eye_shade);
    fill_nose(img, lm.nose, nose_cx, nose_apex, nose_base, nose_hw, nose_shade);
    Box mouth_rect = {static_cast<int>(std::lround(mouth_cx - mouth_hw)),
                      static_cast<int>(std::lround(mouth_cy - mouth_hh)),
                      static_cast<int>(std::lround(mouth_cx + mouth_hw)),
                      static_cast<int>(std::lround(mouth_cy + mouth_hh))};
    mouth_rect.x0 = std::max(mouth_rect.x0, lm.mouth.x0);
    mouth_rect.y0 = std::max(mouth_rect.y0, lm.mouth.y0);
    mouth_rect.x1 = std::min(mouth_rect.x1, lm.mouth.x1);
    mouth_rect.y1 = std::min(mouth_rect.y1, lm.mouth.y1);
    fill_box(img, mouth_rect, mouth_shade);

    return {std::move(img), lm};
}

std::string to_string(Split s) { return s == Split::train ? "train" : "hold"; }
std::string to_string(SplitMode m) {
    return m == SplitMode::image_level ? "image_level" : "identity_disjoint";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "hold") return Split::hold;
    throw DataError("unknown split tag: " + s);
}

SplitMode split_mode_from_string(const std::string& s) {
    if (s == "image_level") return SplitMode::image_level;
    if (s == "identity_disjoint") return SplitMode::identity_disjoint;
    throw ConfigError("unknown split mode: " + s);
}

std::vector<std::size_t> FaceDataset::split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].split == s) out.push_back(i);
    return out;
}

std::vector<int> FaceDataset::identity_ids(Split s) const {
    std::set<int> ids;
    for (const auto& e : entries)
        if (e.split == s) ids.insert(e.identity_id);
    return {ids.begin(), ids.end()};
}

std::uint64_t variation_seed(std::uint64_t corpus_seed, int identity_id, int image_index) {
    return hash_combine(hash_combine(corpus_seed, 0xBEEF0000ULL + static_cast<std::uint64_t>(identity_id)),
                        static_cast<std::uint64_t>(image_index));
}

FaceDataset generate_dataset(int n_identities, int images_per_identity, int height, int width,
                             int channels, double split_fraction, SplitMode mode,
                             std::uint64_t seed, double jitter) {
    if (n_identities < 1 || images_per_identity < 1) {
        throw ConfigError("generate_dataset: counts must be >= 1");
    }
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw ConfigError("generate_dataset: split_fraction must be in (0,1)");
    }

    FaceDataset ds;
    ds.height = height;
    ds.width = width;
    ds.channels = channels;
    ds.split_mode = mode;
    ds.gen = {true, seed, n_identities, images_per_identity, jitter};

    char name[32];
    for (int id = 0; id < n_identities; ++id) {
        const FaceIdentity identity = sample_identity(id, seed);
        for (int j = 0; j < images_per_identity; ++j) {
            auto [img, lm] = render_identity(identity, height, width, channels,
                                             variation_seed(seed, id, j), jitter);
            DatasetEntry e;
            e.image = std::move(img);
            e.identity_id = id;
            e.landmarks = lm;
            std::snprintf(name, sizeof(name), "img_%05d.%s", id * images_per_identity + j,
                          channels == 1 ? "pgm" : "ppm");
            e.filename = name;
            ds.entries.push_back(std::move(e));
        }
    }

    Rng split_rng(hash_combine(seed, 0x5917ULL));
    if (mode == SplitMode::image_level) {
        std::vector<std::size_t> order(ds.entries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[split_rng.next_below(i)]);
        }
        const auto n_train = static_cast<std::size_t>(
            std::llround(split_fraction * static_cast<double>(order.size())));
        for (std::size_t k = 0; k < order.size(); ++k) {
            ds.entries[order[k]].split = k < n_train ? Split::train : Split::hold;
        }
    } else {
        std::vector<int> ids(n_identities);
        for (int i = 0; i < n_identities; ++i) ids[i] = i;
        for (std::size_t i = ids.size(); i > 1; --i) {
            std::swap(ids[i - 1], ids[split_rng.next_below(i)]);
        }
        const auto n_train =
            static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(ids.size())));
        std::set<int> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
        for (auto& e : ds.entries) {
            e.split = train_ids.count(e.identity_id) ? Split::train : Split::hold;
        }
    }
    return ds;
}

namespace {

json box_to_json(const Box& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

Box box_from_json(const json& j, const std::string& context) {
    if (!j.is_array() || j.size() != 4) {
        throw DataError(context + ": landmark box must be [x0,y0,x1,y1]");
    }
    return Box{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json landmarks_to_json(const LandmarkMap& lm) {
    json j;
    for (const auto name : LandmarkMap::names) j[std::string(name)] = box_to_json(lm.get(name));
    return j;
}

LandmarkMap landmarks_from_json(const json& j, const std::string& context) {
    LandmarkMap lm;
    for (const auto name : LandmarkMap::names) {
        const std::string key(name);
        if (!j.contains(key)) throw DataError(context + ": missing landmark '" + key + "'");
        lm.get(name) = box_from_json(j.at(key), context);
    }
    return lm;
}

}  // namespace

void save_dataset(const FaceDataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");
    std::ofstream labels(fs::path(dir) / "labels.csv");
    if (!labels) throw DataError("save_dataset: cannot write labels.csv in " + dir);
    labels << "filename,identity_id,split\n";
    json lmj;
    for (const auto& e : ds.entries) {
        write_pnm(e.image, (fs::path(dir) / "images" / e.filename).string());
        labels << e.filename << "," << e.identity_id << "," << to_string(e.split) << "\n";
        lmj[e.filename] = landmarks_to_json(e.landmarks);
    }
    std::ofstream lmf(fs::path(dir) / "landmarks.json");
    if (!lmf) throw DataError("save_dataset: cannot write landmarks.json in " + dir);
    lmf << lmj.dump(2) << "\n";
}

namespace {

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("parse error in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace

FaceDataset load_dataset(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream labels(root / "labels.csv");
    if (!labels) throw DataError("load_dataset: cannot open " + (root / "labels.csv").string());
    const json lmj = load_json_file((root / "landmarks.json").string());

    FaceDataset ds;
    std::string line;
    std::getline(labels, line);  // header
    while (std::getline(labels, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string fname, ids, split;
        if (!std::getline(ss, fname, ',') || !std::getline(ss, ids, ',') || !std::getline(ss, split)) {
            throw DataError("load_dataset: malformed labels.csv line: " + line);
        }
        DatasetEntry e;
        e.filename = fname;
        e.identity_id = std::stoi(ids);
        e.split = split_from_string(split);
        e.image = read_pnm((root / "images" / fname).string());
        if (!lmj.contains(fname)) {
            throw DataError("load_dataset: landmarks.json has no entry for " + fname);
        }
        e.landmarks = landmarks_from_json(lmj.at(fname), fname);
        validate_landmarks(e.landmarks, e.image.width, e.image.height, fname);
        ds.entries.push_back(std::move(e));
    }
    if (ds.entries.empty()) throw DataError("load_dataset: no entries in " + dir);
    ds.height = ds.entries.front().image.height;
    ds.width = ds.entries.front().image.width;
    ds.channels = ds.entries.front().image.channels;
    for (const auto& e : ds.entries) {
        if (!e.image.same_shape(ds.entries.front().image)) {
            throw DataError("load_dataset: mixed image shapes (" + e.filename + ")");
        }
    }

    // A dataset where no identity straddles the splits is identity-disjoint.
    std::set<int> train_ids, hold_ids;
    for (const auto& e : ds.entries) {
        (e.split == Split::train ? train_ids : hold_ids).insert(e.identity_id);
    }
    ds.split_mode = SplitMode::identity_disjoint;
    for (int id : train_ids) {
        if (hold_ids.count(id)) {
            ds.split_mode = SplitMode::image_level;
            break;
        }
    }
    return ds;
}

FaceDataset load_external_images(const std::string& dir, const std::string& landmark_sidecar) {
    const json lmj = load_json_file(landmark_sidecar);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(entry.path().filename().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("load_external_images: no pixmap files in " + dir);

    FaceDataset ds;
    int next_id = 0;
    for (const auto& fname : files) {
        DatasetEntry e;
        e.filename = fname;
        e.identity_id = next_id++;
        e.split = Split::hold;
        e.image = read_pnm((fs::path(dir) / fname).string());
        if (!lmj.contains(fname)) {
            throw DataError("load_external_images: sidecar has no landmarks for " + fname);
        }
        e.landmarks = landmarks_from_json(lmj.at(fname), fname);
        validate_landmarks(e.landmarks, e.image.width, e.image.height, fname);
        ds.entries.push_back(std::move(e));
    }
    ds.height = ds.entries.front().image.height;
    ds.width = ds.entries.front().image.width;
    ds.channels = ds.entries.front().image.channels;
    for (const auto& e : ds.entries) {
        if (!e.image.same_shape(ds.entries.front().image)) {
            throw DataError("load_external_images: mixed image shapes (" + e.filename + ")");
        }
    }
    return ds;
}

}  // namespace diffaudit
