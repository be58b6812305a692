#include "diffaudit/masks.hpp"

#include <algorithm>
#include <cmath>

#include "diffaudit/errors.hpp"
#include "diffaudit/rng.hpp"

namespace diffaudit {

PixelMask PixelMask::full(int height, int width, std::string label) {
    PixelMask m;
    m.height = height;
    m.width = width;
    m.bits.assign(static_cast<std::size_t>(height) * width, 1);
    m.visible_count = static_cast<long long>(height) * width;
    m.label = std::move(label);
    return m;
}

void PixelMask::set(int y, int x, bool visible) {
    bits[static_cast<std::size_t>(y) * width + x] = visible ? 1 : 0;
}

void PixelMask::recount() {
    visible_count = 0;
    for (auto b : bits) visible_count += b != 0;
}

Image apply_mask(const Image& x, const PixelMask& mask) {
    if (x.height != mask.height || x.width != mask.width) {
        throw DataError("apply_mask: mask shape does not match image");
    }
    Image out = x;
    for (int y = 0; y < x.height; ++y) {
        for (int px = 0; px < x.width; ++px) {
            if (!mask.at(y, px)) {
                for (int c = 0; c < x.channels; ++c) out.at(y, px, c) = 0.0;
            }
        }
    }
    return out;
}

double masked_error(const Image& a, const Image& b, const PixelMask& mask) {
    if (!a.same_shape(b)) throw DataError("masked_error: image shapes differ");
    if (a.height != mask.height || a.width != mask.width) {
        throw DataError("masked_error: mask shape does not match images");
    }
    if (mask.visible_count <= 0) throw DataError("masked_error: blank mask");
    double acc = 0.0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (!mask.at(y, x)) continue;
            for (int c = 0; c < a.channels; ++c) {
                const double d = a.at(y, x, c) - b.at(y, x, c);
                acc += d * d;
            }
        }
    }
    return std::sqrt(acc) / static_cast<double>(mask.visible_count);
}

namespace {

void hide_box(PixelMask& m, const Box& b) {
    for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) m.set(y, x, false);
}

void show_box(PixelMask& m, const Box& b) {
    for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) m.set(y, x, true);
}

PixelMask occlude_boxes(int h, int w, std::initializer_list<const Box*> boxes, std::string label) {
    PixelMask m = PixelMask::full(h, w, std::move(label));
    for (const Box* b : boxes) hide_box(m, *b);
    m.recount();
    if (m.visible_count <= 0 || m.visible_count >= static_cast<long long>(h) * w) {
        throw DataError("occluding mask '" + m.label + "' is blank or a no-op");
    }
    return m;
}

}  // namespace

MaskSuite build_occluding_suite(const LandmarkMap& lm, int height, int width, int n_random_patches,
                                int patch_size, std::uint64_t seed) {
    validate_landmarks(lm, width, height, "build_occluding_suite");
    if (n_random_patches < 0) throw ConfigError("build_occluding_suite: n_random_patches < 0");
    if (n_random_patches > 0 && (patch_size < 1 || patch_size > width || patch_size > height)) {
        throw ConfigError("build_occluding_suite: patch larger than frame");
    }

    MaskSuite suite;
    suite.kind = MaskKind::occluding;
    suite.seed = seed;
    suite.masks.push_back(
        occlude_boxes(height, width, {&lm.left_eye, &lm.right_eye}, "occlude:eyes"));
    suite.masks.push_back(occlude_boxes(height, width, {&lm.nose}, "occlude:nose"));
    suite.masks.push_back(occlude_boxes(height, width, {&lm.mouth}, "occlude:mouth"));
    suite.masks.push_back(occlude_boxes(height, width, {&lm.forehead}, "occlude:forehead"));
    suite.masks.push_back(
        occlude_boxes(height, width, {&lm.left_cheek, &lm.right_cheek}, "occlude:cheeks"));
    suite.masks.push_back(occlude_boxes(height, width, {&lm.chin}, "occlude:chin"));
    suite.masks.push_back(occlude_boxes(height, width, {&lm.left_eye, &lm.right_eye, &lm.nose},
                                        "occlude:eyes+nose"));
    suite.masks.push_back(
        occlude_boxes(height, width, {&lm.nose, &lm.mouth}, "occlude:nose+mouth"));

    Rng rng(hash_combine(seed, 0x0CC1DE5ULL));
    for (int i = 0; i < n_random_patches; ++i) {
        const int x0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(width - patch_size + 1)));
        const int y0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(height - patch_size + 1)));
        const Box patch{x0, y0, x0 + patch_size, y0 + patch_size};
        suite.masks.push_back(occlude_boxes(
            height, width, {&patch},
            "occlude:patch" + std::to_string(i) + "@" + std::to_string(x0) + "," + std::to_string(y0)));
    }
    return suite;
}

MaskSuite build_preserving_suite(const LandmarkMap& lm, int height, int width, int n_masks,
                                 std::uint64_t seed) {
    validate_landmarks(lm, width, height, "build_preserving_suite");
    if (n_masks < 1) throw ConfigError("build_preserving_suite: n_masks must be >= 1");

    const std::array<std::pair<std::string, const Box*>, 4> regions = {{
        {"left_eye", &lm.left_eye},
        {"right_eye", &lm.right_eye},
        {"nose", &lm.nose},
        {"mouth", &lm.mouth},
    }};

    MaskSuite suite;
    suite.kind = MaskKind::preserving;
    suite.seed = seed;
    Rng rng(hash_combine(seed, 0x9E5E9E5ULL));
    unsigned previous = 0;  // 0 = no previous subset
    for (int i = 0; i < n_masks; ++i) {
        unsigned subset;
        do {
            subset = 1u + static_cast<unsigned>(rng.next_below(15));  // non-empty subsets of 4 regions
        } while (subset == previous);
        previous = subset;

        PixelMask m;
        m.height = height;
        m.width = width;
        m.bits.assign(static_cast<std::size_t>(height) * width, 0);
        std::string label = "preserve:";
        for (std::size_t r = 0; r < regions.size(); ++r) {
            if (subset & (1u << r)) {
                show_box(m, *regions[r].second);
                if (label.size() > 9) label += "+";
                label += regions[r].first;
            }
        }
        m.label = label;
        m.recount();
        suite.masks.push_back(std::move(m));
    }
    return suite;
}

std::uint64_t mask_hash(const PixelMask& mask) {
    std::uint64_t h = hash_combine(static_cast<std::uint64_t>(mask.height),
                                   static_cast<std::uint64_t>(mask.width));
    h = hash_combine(h, hash_bytes(mask.bits.data(), mask.bits.size()));
    return h;
}

void write_mask_pgm(const PixelMask& mask, const std::string& path) {
    Image img(mask.height, mask.width, 1);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) img.at(y, x, 0) = mask.at(y, x) ? 1.0 : 0.0;
    write_pnm(img, path);
}

nlohmann::json suite_manifest(const MaskSuite& suite) {
    nlohmann::json j;
    j["kind"] = suite.kind == MaskKind::occluding ? "occluding" : "preserving";
    j["seed"] = suite.seed;
    j["masks"] = nlohmann::json::array();
    for (const auto& m : suite.masks) {
        j["masks"].push_back({{"label", m.label}, {"visible_count", m.visible_count}});
    }
    return j;
}

}  // namespace diffaudit
