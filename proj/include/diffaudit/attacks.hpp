#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffaudit/denoiser.hpp"
#include "diffaudit/masks.hpp"
#include "diffaudit/sampler.hpp"

namespace diffaudit {

// Reconstruction errors over recorded timesteps for one (image, mask) pair,
// ordered by decreasing t.
struct LossTrajectory {
    std::string mask_label;
    std::vector<std::pair<int, double>> errors;
};

struct MaskStats {
    double mean = 0.0;
    double stddev = 0.0;  // population
    double cv = 0.0;
    double skewness = 0.0;
    double mean_rate_of_change = 0.0;
};

// Population statistics over the recorded errors; needs >= 2 entries. An
// all-zero trajectory is degenerate and reports all-zero stats.
MaskStats trajectory_stats(const LossTrajectory& traj);

struct MiaResult {
    double confidence = 0.0;
    bool is_member = false;
    double threshold = 0.0;
    std::vector<std::pair<std::string, MaskStats>> per_mask;
};

// 1 / (1 + mean_i(CV_i + |S_i| + dE_i)); always in (0, 1] for finite
// non-negative stats and strictly decreasing in each component.
double mia_confidence_from_stats(std::span<const MaskStats> stats);

// exp(-(sigma + mu)).
double iia_score(double mu, double sigma);

// Confidence 1 / (1 + mean_i(CV_i + |S_i| + dE_i)) over the occluding
// suite; per-mask noise streams derive from the mask content, so the score
// is invariant under suite reordering.
MiaResult mia_attack(const Image& xq, const LandmarkMap& landmarks, const Denoiser& model,
                     const NoiseSchedule& sched, const MaskSuite& suite, const SamplerConfig& config,
                     double threshold, int workers = 1);

struct IiaResult {
    std::vector<std::pair<double, double>> per_query;  // (mean, stddev) of RMS errors
    double mu_overall = 0.0;
    double sigma_overall = 0.0;
    double score = 0.0;  // exp(-(sigma + mu))
    bool is_member = false;
    double threshold = 0.5;
    std::vector<std::string> drawn_masks;
};

// Identity-level score over a query set of the same identity. Each query
// gets one occluding mask drawn from the suite, seeded by the query content
// so the result is invariant under query reordering.
IiaResult iia_attack(std::span<const Image> queries, std::span<const LandmarkMap> landmarks,
                     const Denoiser& model, const NoiseSchedule& sched, const MaskSuite& suite,
                     const SamplerConfig& config, double threshold = 0.5, int workers = 1);

struct ClusterResult {
    int k = 0;
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignments;
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> inertia_history;  // objective after each Lloyd iteration
    // Filled by extraction_attack: the reconstruction nearest each centroid.
    std::vector<int> representative_indices;
    std::vector<Image> representatives;
};

// Lloyd's algorithm with k-means++ seeding; stops when assignments no
// longer change. Ties go to the lowest cluster index; empty clusters are
// re-seeded with the point farthest from its assigned centroid.
ClusterResult kmeans(const std::vector<std::vector<double>>& features, int k, int max_iters,
                     std::uint64_t seed);

// Feature vector for clustering: pixel values over the four canonical
// feature boxes, fixed order and dimension regardless of mask subset.
std::vector<double> extraction_features(const Image& img, const LandmarkMap& landmarks);

// Generates n_samples reconstructions (round-robin over the preserving
// suite, fresh seed per sample), clusters them in feature space, and keeps
// one representative image per cluster.
ClusterResult extraction_attack(const Image& xq, const LandmarkMap& landmarks, const Denoiser& model,
                                const NoiseSchedule& sched, const MaskSuite& preserving,
                                int n_samples, int k, const SamplerConfig& config, int workers = 1);

}  // namespace diffaudit
