#include "diffaudit/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diffaudit/errors.hpp"
#include "diffaudit/parallel.hpp"
#include "diffaudit/rng.hpp"

namespace diffaudit {

MaskStats trajectory_stats(const LossTrajectory& traj) {
    const auto& e = traj.errors;
    const auto n = e.size();
    if (n < 2) throw DataError("trajectory_stats: need at least 2 entries");
    for (const auto& [t, v] : e) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw NumericError("trajectory_stats: invalid error value in '" + traj.mask_label + "'");
        }
    }

    MaskStats s;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (const auto& [t, v] : e) s.mean += v;
    s.mean *= inv_n;
    if (s.mean == 0.0) return s;  // degenerate all-zero trajectory

    double var = 0.0;
    for (const auto& [t, v] : e) {
        const double d = v - s.mean;
        var += d * d;
    }
    var *= inv_n;
    s.stddev = std::sqrt(var);
    s.cv = s.stddev / s.mean;
    if (s.stddev > 0.0) {
        double skew = 0.0;
        for (const auto& [t, v] : e) {
            const double z = (v - s.mean) / s.stddev;
            skew += z * z * z;
        }
        s.skewness = skew * inv_n;
    }
    double rate = 0.0;
    for (std::size_t i = 1; i < n; ++i) rate += std::fabs(e[i].second - e[i - 1].second);
    s.mean_rate_of_change = rate / static_cast<double>(n - 1);
    return s;
}

namespace {

// Sum with a canonical (sorted) order, so aggregates are exactly invariant
// under reordering of the contributions.
double ordered_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
}

LossTrajectory run_masked_trajectory(const Image& xq, const PixelMask& mask, const Denoiser& model,
                                     const NoiseSchedule& sched, SamplerConfig cfg) {
    cfg.rng_seed = hash_combine(cfg.rng_seed, mask_hash(mask));
    const Image masked = apply_mask(xq, mask);
    LossTrajectory traj;
    traj.mask_label = mask.label;
    for (const auto& point : reconstruct_trajectory(xq, mask, model, sched, cfg)) {
        traj.errors.emplace_back(point.t, masked_error(masked, point.x0_estimate, mask));
    }
    return traj;
}

}  // namespace

double mia_confidence_from_stats(std::span<const MaskStats> stats) {
    if (stats.empty()) throw ConfigError("mia_confidence_from_stats: no stats");
    std::vector<double> contributions(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        contributions[i] = stats[i].cv + std::fabs(stats[i].skewness) + stats[i].mean_rate_of_change;
    }
    const double mean_variability =
        ordered_sum(std::move(contributions)) / static_cast<double>(stats.size());
    return 1.0 / (1.0 + mean_variability);
}

double iia_score(double mu, double sigma) { return std::exp(-(sigma + mu)); }

MiaResult mia_attack(const Image& xq, const LandmarkMap& landmarks, const Denoiser& model,
                     const NoiseSchedule& sched, const MaskSuite& suite, const SamplerConfig& config,
                     double threshold, int workers) {
    if (suite.kind != MaskKind::occluding) throw ConfigError("mia_attack: suite kind must be occluding");
    if (suite.masks.empty()) throw ConfigError("mia_attack: empty mask suite");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("mia_attack: threshold outside (0,1)");
    validate_landmarks(landmarks, xq.width, xq.height, "mia_attack");

    const SamplerConfig cfg = resolve_sampler(config, sched.timesteps);
    const std::size_t n = suite.masks.size();
    std::vector<MaskStats> stats(n);
    parallel_for(n, workers, [&](std::size_t i) {
        stats[i] = trajectory_stats(run_masked_trajectory(xq, suite.masks[i], model, sched, cfg));
    });

    MiaResult result;
    result.confidence = mia_confidence_from_stats(stats);
    result.threshold = threshold;
    result.is_member = result.confidence >= threshold;
    result.per_mask.reserve(n);
    for (std::size_t i = 0; i < n; ++i) result.per_mask.emplace_back(suite.masks[i].label, stats[i]);
    return result;
}

IiaResult iia_attack(std::span<const Image> queries, std::span<const LandmarkMap> landmarks,
                     const Denoiser& model, const NoiseSchedule& sched, const MaskSuite& suite,
                     const SamplerConfig& config, double threshold, int workers) {
    if (queries.empty()) throw DataError("iia_attack: empty query list");
    if (landmarks.size() != queries.size()) {
        throw DataError("iia_attack: need one landmark map per query");
    }
    if (suite.kind != MaskKind::occluding) throw ConfigError("iia_attack: suite kind must be occluding");
    if (suite.masks.empty()) throw ConfigError("iia_attack: empty mask suite");

    const SamplerConfig base = resolve_sampler(config, sched.timesteps);
    const std::size_t k = queries.size();
    std::vector<std::pair<double, double>> per_query(k);
    std::vector<std::string> drawn(k);

    parallel_for(k, workers, [&](std::size_t q) {
        validate_landmarks(landmarks[q], queries[q].width, queries[q].height, "iia_attack");
        // Mask choice and noise both keyed by query content: the score is
        // invariant under reordering of the query list.
        const std::uint64_t qhash = content_hash(queries[q]);
        Rng pick(hash_combine(hash_combine(base.rng_seed, 0x11A0000ULL), qhash));
        const auto& mask = suite.masks[pick.next_below(suite.masks.size())];
        drawn[q] = mask.label;

        SamplerConfig cfg = base;
        cfg.rng_seed = hash_combine(base.rng_seed, qhash);
        cfg.rng_seed = hash_combine(cfg.rng_seed, mask_hash(mask));
        const auto points = reconstruct_trajectory(queries[q], mask, model, sched, cfg);
        if (points.size() < 2) {
            throw ConfigError("iia_attack: trajectory too short for statistics; lower record_every");
        }
        // RMS-normalized Euclidean distance against the unmasked query.
        std::vector<double> errors;
        errors.reserve(points.size());
        for (const auto& p : points) errors.push_back(rmse(queries[q], p.x0_estimate));
        double mu = 0.0;
        for (double e : errors) mu += e;
        mu /= static_cast<double>(errors.size());
        double var = 0.0;
        for (double e : errors) var += (e - mu) * (e - mu);
        var /= static_cast<double>(errors.size());
        per_query[q] = {mu, std::sqrt(var)};
    });

    std::vector<double> mus(k), sigmas(k);
    for (std::size_t q = 0; q < k; ++q) {
        mus[q] = per_query[q].first;
        sigmas[q] = per_query[q].second;
    }

    IiaResult result;
    result.per_query = std::move(per_query);
    result.mu_overall = ordered_sum(std::move(mus)) / static_cast<double>(k);
    result.sigma_overall = ordered_sum(std::move(sigmas)) / static_cast<double>(k);
    result.score = iia_score(result.mu_overall, result.sigma_overall);
    result.threshold = threshold;
    result.is_member = result.score >= threshold;
    result.drawn_masks = std::move(drawn);
    return result;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

ClusterResult kmeans(const std::vector<std::vector<double>>& features, int k, int max_iters,
                     std::uint64_t seed) {
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    const std::size_t n = features.size();
    if (n < static_cast<std::size_t>(k)) throw DataError("kmeans: fewer points than clusters");
    const std::size_t dim = features.front().size();
    for (const auto& f : features) {
        if (f.size() != dim) throw DataError("kmeans: feature dimension mismatch");
    }

    Rng rng(hash_combine(seed, 0x4B3A25ULL));
    ClusterResult res;
    res.k = k;
    res.assignments.assign(n, -1);

    // k-means++ seeding.
    res.centroids.push_back(features[rng.next_below(n)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (static_cast<int>(res.centroids.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(features[i], res.centroids.back()));
            total += d2[i];
        }
        std::size_t chosen;
        if (total > 0.0) {
            const double target = rng.next_double() * total;
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = rng.next_below(n);  // all points coincide with a centroid
        }
        res.centroids.push_back(features[chosen]);
    }

    auto assign = [&]() {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(features[i], res.centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(features[i], res.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (res.assignments[i] != best) {
                res.assignments[i] = best;
                changed = true;
            }
            inertia += best_d;
        }
        res.inertia = inertia;
        return changed;
    };

    assign();
    res.inertia_history.push_back(res.inertia);

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim));
    std::vector<std::size_t> counts(k);
    for (int iter = 0; iter < max_iters; ++iter) {
        for (auto& s : sums) std::fill(s.begin(), s.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[res.assignments[i]];
            for (std::size_t d = 0; d < dim; ++d) s[d] += features[i][d];
            ++counts[res.assignments[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed an empty cluster with the point farthest from its
                // assigned centroid.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(features[i], res.centroids[res.assignments[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                res.centroids[c] = features[far];
            } else {
                const double inv = 1.0 / static_cast<double>(counts[c]);
                for (std::size_t d = 0; d < dim; ++d) res.centroids[c][d] = sums[c][d] * inv;
            }
        }
        const bool changed = assign();
        res.inertia_history.push_back(res.inertia);
        res.iterations = iter + 1;
        if (!changed) break;
    }
    return res;
}

std::vector<double> extraction_features(const Image& img, const LandmarkMap& lm) {
    std::vector<double> f;
    for (const Box* b : {&lm.left_eye, &lm.right_eye, &lm.nose, &lm.mouth}) {
        for (int y = b->y0; y < b->y1; ++y)
            for (int x = b->x0; x < b->x1; ++x)
                for (int c = 0; c < img.channels; ++c) f.push_back(img.at(y, x, c));
    }
    return f;
}

ClusterResult extraction_attack(const Image& xq, const LandmarkMap& landmarks, const Denoiser& model,
                                const NoiseSchedule& sched, const MaskSuite& preserving,
                                int n_samples, int k, const SamplerConfig& config, int workers) {
    if (preserving.kind != MaskKind::preserving) {
        throw ConfigError("extraction_attack: suite kind must be preserving");
    }
    if (preserving.masks.empty()) throw ConfigError("extraction_attack: empty mask suite");
    if (n_samples < k || k < 1) throw ConfigError("extraction_attack: need n_samples >= k >= 1");
    validate_landmarks(landmarks, xq.width, xq.height, "extraction_attack");

    const SamplerConfig base = resolve_sampler(config, sched.timesteps);
    std::vector<Image> reconstructions(n_samples);
    parallel_for(static_cast<std::size_t>(n_samples), workers, [&](std::size_t j) {
        const auto& mask = preserving.masks[j % preserving.masks.size()];
        SamplerConfig cfg = base;
        cfg.rng_seed = hash_combine(base.rng_seed, 0xDEA00000ULL + j);
        reconstructions[j] = reconstruct_final(xq, mask, model, sched, cfg);
    });

    std::vector<std::vector<double>> features(n_samples);
    for (int j = 0; j < n_samples; ++j) features[j] = extraction_features(reconstructions[j], landmarks);

    ClusterResult res = kmeans(features, k, 100, hash_combine(base.rng_seed, 0xC1A57E2ULL));
    res.representative_indices.assign(k, -1);
    std::vector<double> best(k, std::numeric_limits<double>::infinity());
    for (int j = 0; j < n_samples; ++j) {
        const int c = res.assignments[j];
        const double d = sq_dist(features[j], res.centroids[c]);
        if (d < best[c]) {
            best[c] = d;
            res.representative_indices[c] = j;
        }
    }
    res.representatives.reserve(k);
    for (int c = 0; c < k; ++c) {
        // Every cluster is non-empty after re-seeding, so the index is set.
        res.representatives.push_back(clamp01(reconstructions[res.representative_indices[c]]));
    }
    return res;
}

}  // namespace diffaudit
