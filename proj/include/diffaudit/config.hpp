#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffaudit/experiments.hpp"
#include "diffaudit/sampler.hpp"

namespace diffaudit {

// Resolved settings for one CLI invocation. Serialized as a flat key=value
// file; every emitted artifact embeds the fully resolved form, and re-running
// a command from that file reproduces the artifact byte for byte.
struct RunConfig {
    // paths
    std::string dataset_dir;
    std::string checkpoint;
    std::string out_dir = "out";

    // dataset generation
    int identities = 16;
    int images_per_identity = 4;
    int height = 32, width = 32, channels = 1;
    double split_fraction = 0.6;
    std::string split_mode = "image_level";
    double jitter = 0.05;

    // schedule
    int timesteps = 200;
    double beta_min = 1e-4;
    double beta_max = 0.02;

    // training
    int epochs = 2000;
    double learning_rate = 1e-3;
    int hidden_dim = 256;
    int embed_dim = 32;

    // sampler
    std::string sampler_kind = "deterministic";
    std::string dea_sampler_kind = "ancestral";
    int t_start = 0;       // 0 -> T/2
    int record_every = 0;  // 0 -> max(1, t_start/25)

    // attacks
    double mia_threshold = 0.6;
    double iia_threshold = 0.5;
    int occ_random_patches = 3;
    int occ_patch_size = 8;
    int preserve_masks = 10;
    int dea_samples = 100;
    int dea_clusters = 10;
    double rmse_match_threshold = 0.15;

    // evaluation
    std::string profile = "paper";  // paper: 100 queries; fast: 20
    int n_queries = 0;              // 0 -> profile default
    int n_runs = 7;
    std::vector<int> iia_query_counts = {1, 3, 5, 8, 10};
    int iia_identities_per_class = 8;
    std::vector<int> sweep_t_starts;
    std::string eval_attack = "mia";

    // attack subjects
    std::string query;   // dataset filename for attack-mia / attack-dea
    int identity = -1;   // identity id for attack-iia

    // seeds (0 -> derived from `seed`)
    std::uint64_t seed = 1;
    std::uint64_t dataset_seed = 0;
    std::uint64_t train_seed = 0;
    std::uint64_t attack_seed = 0;

    // Runtime-only: results never depend on it, so it is not embedded in
    // artifacts (0 -> logical CPUs).
    int workers = 0;

    // Fills derived defaults (seeds, n_queries, workers) in place.
    void resolve();

    SamplerKind parsed_sampler_kind() const;
    SamplerKind parsed_dea_sampler_kind() const;
    SplitMode parsed_split_mode() const;
    ExperimentConfig experiment_config() const;

    // Flat serialization; keys are stable and sorted.
    std::map<std::string, std::string> to_map() const;
    static RunConfig from_map(const std::map<std::string, std::string>& kv);

    nlohmann::json to_json() const;
};

// key=value lines, '#' comments; unknown keys are ConfigErrors naming the key.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void write_config_file(const RunConfig& config, const std::string& path);

}  // namespace diffaudit
