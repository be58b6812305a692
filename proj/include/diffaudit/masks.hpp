#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffaudit/faces.hpp"
#include "diffaudit/image.hpp"

namespace diffaudit {

// Binary H x W visibility mask (1 = visible). Broadcast across channels
// when applied to an image.
struct PixelMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;
    long long visible_count = 0;
    std::string label;

    static PixelMask full(int height, int width, std::string label = "identity");

    bool at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int y, int x, bool visible);
    void recount();
};

enum class MaskKind { occluding, preserving };

struct MaskSuite {
    std::vector<PixelMask> masks;
    MaskKind kind = MaskKind::occluding;
    std::uint64_t seed = 0;
};

// x ⊙ M: occluded pixels become exactly 0.
Image apply_mask(const Image& x, const PixelMask& mask);

// ||(a - b) ⊙ M||_2 / N with N the visible-pixel count of the mask.
double masked_error(const Image& a, const Image& b, const PixelMask& mask);

// Fixed sequence: 6 single-region occlusions (eyes, nose, mouth, forehead,
// cheeks, chin), 2 grouped (eyes+nose, nose+mouth), then n_random_patches
// masks each hiding one patch_size x patch_size square.
MaskSuite build_occluding_suite(const LandmarkMap& landmarks, int height, int width,
                                int n_random_patches, int patch_size, std::uint64_t seed);

// Each mask keeps a random non-empty subset of {left_eye, right_eye, nose,
// mouth} visible and hides everything else; consecutive masks never repeat
// a subset.
MaskSuite build_preserving_suite(const LandmarkMap& landmarks, int height, int width, int n_masks,
                                 std::uint64_t seed);

std::uint64_t mask_hash(const PixelMask& mask);

void write_mask_pgm(const PixelMask& mask, const std::string& path);
nlohmann::json suite_manifest(const MaskSuite& suite);

}  // namespace diffaudit
