#include "diffaudit/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "diffaudit/errors.hpp"
#include "diffaudit/parallel.hpp"
#include "diffaudit/rng.hpp"

namespace diffaudit {

namespace {

std::vector<std::size_t> sample_without_replacement(std::span<const std::size_t> pool, std::size_t n,
                                                    Rng& rng) {
    std::vector<std::size_t> items(pool.begin(), pool.end());
    for (std::size_t i = 0; i < n; ++i) {
        std::swap(items[i], items[i + rng.next_below(items.size() - i)]);
    }
    items.resize(n);
    return items;
}

RunMetrics aggregate_mean(const std::vector<RunMetrics>& runs) {
    RunMetrics mean;
    for (const auto& r : runs) {
        mean.accuracy += r.accuracy;
        mean.precision += r.precision;
        mean.recall += r.recall;
        mean.auc += r.auc;
    }
    const double inv = 1.0 / static_cast<double>(runs.size());
    mean.accuracy *= inv;
    mean.precision *= inv;
    mean.recall *= inv;
    mean.auc *= inv;
    return mean;
}

MetricsReport make_report(std::vector<RunMetrics> runs, double threshold) {
    MetricsReport rep;
    const RunMetrics mean = aggregate_mean(runs);
    rep.accuracy = mean.accuracy;
    rep.precision = mean.precision;
    rep.recall = mean.recall;
    rep.auc = mean.auc;
    rep.threshold = threshold;
    rep.n_runs = static_cast<int>(runs.size());
    rep.per_run = std::move(runs);
    return rep;
}

}  // namespace

MetricsReport run_mia_experiment(const FaceDataset& dataset, const Denoiser& model,
                                 const NoiseSchedule& sched, const ExperimentConfig& config,
                                 int n_queries, int n_runs, std::uint64_t seed) {
    if (n_queries < 2 || n_runs < 1) throw ConfigError("run_mia_experiment: need n_queries >= 2, n_runs >= 1");
    const auto train_idx = dataset.split_indices(Split::train);
    const auto hold_idx = dataset.split_indices(Split::hold);
    const std::size_t per_class = static_cast<std::size_t>(n_queries) / 2;
    if (train_idx.size() < per_class || hold_idx.size() < per_class) {
        throw DataError("run_mia_experiment: a split has fewer than n_queries/2 images");
    }

    std::vector<RunMetrics> runs;
    for (int run = 0; run < n_runs; ++run) {
        Rng rng(hash_combine(hash_combine(seed, 0x31A0000ULL), static_cast<std::uint64_t>(run)));
        auto members = sample_without_replacement(train_idx, per_class, rng);
        auto nonmembers = sample_without_replacement(hold_idx, per_class, rng);

        std::vector<std::size_t> queries = members;
        queries.insert(queries.end(), nonmembers.begin(), nonmembers.end());
        std::vector<LabeledScore> scores(queries.size());
        parallel_for(queries.size(), config.workers, [&](std::size_t i) {
            const auto& entry = dataset.entries[queries[i]];
            const MaskSuite suite =
                build_occluding_suite(entry.landmarks, dataset.height, dataset.width,
                                      config.occluding_random_patches, config.occluding_patch_size,
                                      hash_combine(seed, 0x0CC0000ULL));
            const MiaResult mia = mia_attack(entry.image, entry.landmarks, model, sched, suite,
                                             config.sampler, config.mia_threshold);
            scores[i] = {mia.confidence, i < per_class ? Truth::member : Truth::nonmember,
                         entry.filename};
        });
        runs.push_back(classification_metrics(scores, config.mia_threshold).per_run[0]);
    }
    return make_report(std::move(runs), config.mia_threshold);
}

namespace {

constexpr int kMaxQueriesPerIdentity = 64;

// Fresh renders of an identity; slot keeps the variation-seed space of
// different (query count, run) combinations disjoint from the corpus and
// from each other. Identity ids >= gen.n_identities were never rendered
// during generation, which is exactly what the nonmember class needs.
std::vector<std::pair<Image, LandmarkMap>> render_query_set(const FaceDataset& ds, int identity_id,
                                                            int count, int slot) {
    const FaceIdentity identity = sample_identity(identity_id, ds.gen.seed);
    std::vector<std::pair<Image, LandmarkMap>> out;
    out.reserve(count);
    for (int q = 0; q < count; ++q) {
        const int index = ds.gen.images_per_identity + slot * kMaxQueriesPerIdentity + q;
        out.push_back(render_identity(identity, ds.height, ds.width, ds.channels,
                                      variation_seed(ds.gen.seed, identity_id, index), ds.gen.jitter));
    }
    return out;
}

}  // namespace

std::vector<std::pair<int, MetricsReport>> run_iia_experiment(
    const FaceDataset& dataset, const Denoiser& model, const NoiseSchedule& sched,
    const ExperimentConfig& config, std::span<const int> query_counts, int identities_per_class,
    int n_runs, std::uint64_t seed) {
    if (dataset.split_mode != SplitMode::identity_disjoint) {
        throw ConfigError("run_iia_experiment: dataset must be identity_disjoint");
    }
    if (!dataset.gen.available) {
        throw DataError("run_iia_experiment: dataset lacks generator metadata for query rendering");
    }
    if (identities_per_class < 1 || n_runs < 1 || query_counts.empty()) {
        throw ConfigError("run_iia_experiment: bad evaluation parameters");
    }
    for (int q : query_counts) {
        if (q < 1 || q > kMaxQueriesPerIdentity) {
            throw ConfigError("run_iia_experiment: query count outside [1, 64]");
        }
    }

    const auto member_ids = dataset.identity_ids(Split::train);
    if (member_ids.size() < static_cast<std::size_t>(identities_per_class)) {
        throw DataError("run_iia_experiment: not enough member identities");
    }

    // Shared mask pool on the corpus geometry.
    const MaskSuite suite = build_occluding_suite(
        dataset.entries.front().landmarks, dataset.height, dataset.width,
        config.occluding_random_patches, config.occluding_patch_size, hash_combine(seed, 0x0CC0000ULL));

    std::vector<std::pair<int, MetricsReport>> reports;
    for (std::size_t qc = 0; qc < query_counts.size(); ++qc) {
        const int count = query_counts[qc];
        std::vector<RunMetrics> runs;
        for (int run = 0; run < n_runs; ++run) {
            const int slot = static_cast<int>(qc) * n_runs + run;
            Rng rng(hash_combine(hash_combine(seed, 0x11A0000ULL + qc), static_cast<std::uint64_t>(run)));

            std::vector<std::size_t> pool(member_ids.size());
            for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
            const auto chosen = sample_without_replacement(pool, identities_per_class, rng);

            struct Subject {
                int identity_id;
                Truth truth;
            };
            std::vector<Subject> subjects;
            for (auto idx : chosen) subjects.push_back({member_ids[idx], Truth::member});
            for (int c = 0; c < identities_per_class; ++c) {
                const int fresh_id =
                    dataset.gen.n_identities + slot * identities_per_class + c;
                subjects.push_back({fresh_id, Truth::nonmember});
            }

            std::vector<LabeledScore> scores(subjects.size());
            parallel_for(subjects.size(), config.workers, [&](std::size_t s) {
                auto rendered = render_query_set(dataset, subjects[s].identity_id, count, slot);
                std::vector<Image> queries;
                std::vector<LandmarkMap> landmarks;
                for (auto& [img, lm] : rendered) {
                    queries.push_back(std::move(img));
                    landmarks.push_back(lm);
                }
                const IiaResult iia = iia_attack(queries, landmarks, model, sched, suite,
                                                 config.sampler, config.iia_threshold);
                scores[s] = {iia.score, subjects[s].truth,
                             "identity_" + std::to_string(subjects[s].identity_id)};
            });
            runs.push_back(classification_metrics(scores, config.iia_threshold).per_run[0]);
        }
        reports.emplace_back(count, make_report(std::move(runs), config.iia_threshold));
    }
    return reports;
}

ExtractionRates run_extraction_experiment(const FaceDataset& dataset, const Denoiser& model,
                                          const NoiseSchedule& sched, const ExperimentConfig& config,
                                          int n_queries, double rmse_match_threshold,
                                          double mia_threshold, int n_samples, int clusters,
                                          std::uint64_t seed) {
    if (n_queries < 1) throw ConfigError("run_extraction_experiment: n_queries must be >= 1");
    if (!(rmse_match_threshold >= 0.0)) {
        throw ConfigError("run_extraction_experiment: bad rmse_match_threshold");
    }
    const auto train_idx = dataset.split_indices(Split::train);
    if (train_idx.size() < static_cast<std::size_t>(n_queries)) {
        throw DataError("run_extraction_experiment: train split smaller than n_queries");
    }

    Rng rng(hash_combine(seed, 0xDEA0000ULL));
    const auto queries = sample_without_replacement(train_idx, static_cast<std::size_t>(n_queries), rng);

    double one_hits = 0.0, mia_hits = 0.0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto& entry = dataset.entries[queries[qi]];
        const MaskSuite preserving =
            build_preserving_suite(entry.landmarks, dataset.height, dataset.width,
                                   config.preserving_masks, hash_combine(seed, 0x9E50000ULL));
        SamplerConfig sampler = config.sampler;
        sampler.rng_seed = hash_combine(sampler.rng_seed, 0xD0000ULL + qi);
        const ClusterResult extraction =
            extraction_attack(entry.image, entry.landmarks, model, sched, preserving, n_samples,
                              clusters, sampler, config.workers);

        bool one = false;
        for (const auto& rep : extraction.representatives) {
            for (auto ti : train_idx) {
                const auto& t = dataset.entries[ti];
                if (t.identity_id != entry.identity_id) continue;
                if (rmse(rep, t.image) <= rmse_match_threshold) {
                    one = true;
                    break;
                }
            }
            if (one) break;
        }
        if (one) one_hits += 1.0;

        const MaskSuite occluding =
            build_occluding_suite(entry.landmarks, dataset.height, dataset.width,
                                  config.occluding_random_patches, config.occluding_patch_size,
                                  hash_combine(seed, 0x0CC0000ULL));
        std::vector<std::uint8_t> passed(extraction.representatives.size(), 0);
        parallel_for(extraction.representatives.size(), config.workers, [&](std::size_t r) {
            const MiaResult mia = mia_attack(extraction.representatives[r], entry.landmarks, model,
                                             sched, occluding, config.sampler, mia_threshold);
            passed[r] = mia.confidence >= mia_threshold ? 1 : 0;
        });
        if (std::any_of(passed.begin(), passed.end(), [](std::uint8_t p) { return p != 0; })) {
            mia_hits += 1.0;
        }
    }
    return {one_hits / static_cast<double>(n_queries), mia_hits / static_cast<double>(n_queries)};
}

std::vector<std::pair<int, MetricsReport>> sweep_timesteps(
    std::span<const int> t_starts, int timesteps, const std::function<MetricsReport(int)>& runner) {
    for (int t : t_starts) {
        if (t < 1 || t > timesteps) {
            throw ConfigError("sweep_timesteps: t_start " + std::to_string(t) + " outside [1, " +
                              std::to_string(timesteps) + "]");
        }
    }
    std::vector<std::pair<int, MetricsReport>> rows;
    rows.reserve(t_starts.size());
    for (int t : t_starts) rows.emplace_back(t, runner(t));
    return rows;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_metrics_csv: cannot open " + path);
    out << "metric,run,value\n";
    const std::array<std::pair<const char*, double RunMetrics::*>, 4> fields = {{
        {"accuracy", &RunMetrics::accuracy},
        {"precision", &RunMetrics::precision},
        {"recall", &RunMetrics::recall},
        {"auc_roc", &RunMetrics::auc},
    }};
    for (const auto& [name, member] : fields) {
        for (std::size_t r = 0; r < report.per_run.size(); ++r) {
            out << name << "," << r << "," << fmt_double(report.per_run[r].*member) << "\n";
        }
    }
    out << "accuracy,mean," << fmt_double(report.accuracy) << "\n";
    out << "precision,mean," << fmt_double(report.precision) << "\n";
    out << "recall,mean," << fmt_double(report.recall) << "\n";
    out << "auc_roc,mean," << fmt_double(report.auc) << "\n";
}

void write_sweep_csv(std::span<const std::pair<int, MetricsReport>> rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_sweep_csv: cannot open " + path);
    out << "t_start,accuracy,precision,recall,auc_roc\n";
    for (const auto& [t, rep] : rows) {
        out << t << "," << fmt_double(rep.accuracy) << "," << fmt_double(rep.precision) << ","
            << fmt_double(rep.recall) << "," << fmt_double(rep.auc) << "\n";
    }
}

void write_sweep_dat(std::span<const std::pair<int, MetricsReport>> rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("write_sweep_dat: cannot open " + path);
    out << "# t_start accuracy precision recall auc_roc\n";
    for (const auto& [t, rep] : rows) {
        out << t << " " << fmt_double(rep.accuracy) << " " << fmt_double(rep.precision) << " "
            << fmt_double(rep.recall) << " " << fmt_double(rep.auc) << "\n";
    }
}

}  // namespace diffaudit
