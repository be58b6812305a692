#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diffaudit/attacks.hpp"
#include "diffaudit/metrics.hpp"

namespace diffaudit {

struct ExperimentConfig {
    SamplerConfig sampler;
    int workers = 1;
    double mia_threshold = 0.6;
    double iia_threshold = 0.5;
    int occluding_random_patches = 3;
    int occluding_patch_size = 8;
    int preserving_masks = 10;
};

// Per run: n_queries/2 member images from the train split, n_queries/2
// nonmember images from the holdout, one MIA confidence each. Reports
// per-run metrics and their means.
MetricsReport run_mia_experiment(const FaceDataset& dataset, const Denoiser& model,
                                 const NoiseSchedule& sched, const ExperimentConfig& config,
                                 int n_queries, int n_runs, std::uint64_t seed);

// Identity-level evaluation on an identity-disjoint synthetic corpus.
// Member queries are fresh renders of training identities; nonmember
// queries come from never-rendered identity parameters. One report per
// requested query count.
std::vector<std::pair<int, MetricsReport>> run_iia_experiment(
    const FaceDataset& dataset, const Denoiser& model, const NoiseSchedule& sched,
    const ExperimentConfig& config, std::span<const int> query_counts, int identities_per_class,
    int n_runs, std::uint64_t seed);

struct ExtractionRates {
    double asr_one = 0.0;
    double asr_mia = 0.0;
};

// ASR-one: fraction of member queries where some representative lands
// within rmse_match_threshold of a training image of the query's identity.
// ASR-MIA: fraction where some representative passes the MIA threshold.
ExtractionRates run_extraction_experiment(const FaceDataset& dataset, const Denoiser& model,
                                          const NoiseSchedule& sched, const ExperimentConfig& config,
                                          int n_queries, double rmse_match_threshold,
                                          double mia_threshold, int n_samples, int clusters,
                                          std::uint64_t seed);

// Reruns an experiment for each t_start value (validated against [1, T]).
std::vector<std::pair<int, MetricsReport>> sweep_timesteps(
    std::span<const int> t_starts, int timesteps,
    const std::function<MetricsReport(int)>& runner);

// CSV writers. Metrics rows are "metric,run,value" with a trailing mean
// row per metric; the .dat variant is gnuplot-ready.
void write_metrics_csv(const MetricsReport& report, const std::string& path);
void write_sweep_csv(std::span<const std::pair<int, MetricsReport>> rows, const std::string& path);
void write_sweep_dat(std::span<const std::pair<int, MetricsReport>> rows, const std::string& path);

}  // namespace diffaudit
