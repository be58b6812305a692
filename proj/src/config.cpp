#include "diffaudit/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "diffaudit/errors.hpp"
#include "diffaudit/parallel.hpp"
#include "diffaudit/rng.hpp"

namespace diffaudit {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> split_ints(const std::string& s, const std::string& key) {
    std::vector<int> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("config: bad integer list for '" + key + "': " + s);
        }
    }
    return out;
}

int to_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad seed for '" + key + "': " + v);
    }
}

}  // namespace

void RunConfig::resolve() {
    if (dataset_seed == 0) dataset_seed = hash_combine(seed, 0xDA7AULL);
    if (train_seed == 0) train_seed = hash_combine(seed, 0x7241ULL);
    if (attack_seed == 0) attack_seed = hash_combine(seed, 0xA77AULL);
    if (n_queries == 0) n_queries = profile == "fast" ? 20 : 100;
    if (workers == 0) workers = default_workers();
    if (profile != "fast" && profile != "paper") {
        throw ConfigError("config: profile must be 'fast' or 'paper', got '" + profile + "'");
    }
    if (!(mia_threshold > 0.0 && mia_threshold < 1.0) ||
        !(iia_threshold > 0.0 && iia_threshold < 1.0)) {
        throw ConfigError("config: attack thresholds must lie in (0,1)");
    }
    parsed_sampler_kind();
    parsed_dea_sampler_kind();
    parsed_split_mode();
}

SamplerKind RunConfig::parsed_sampler_kind() const {
    if (sampler_kind == "deterministic") return SamplerKind::deterministic;
    if (sampler_kind == "ancestral") return SamplerKind::ancestral;
    throw ConfigError("config: sampler_kind must be 'deterministic' or 'ancestral'");
}

SamplerKind RunConfig::parsed_dea_sampler_kind() const {
    if (dea_sampler_kind == "deterministic") return SamplerKind::deterministic;
    if (dea_sampler_kind == "ancestral") return SamplerKind::ancestral;
    throw ConfigError("config: dea_sampler_kind must be 'deterministic' or 'ancestral'");
}

SplitMode RunConfig::parsed_split_mode() const { return split_mode_from_string(split_mode); }

ExperimentConfig RunConfig::experiment_config() const {
    ExperimentConfig e;
    e.sampler.kind = parsed_sampler_kind();
    e.sampler.t_start = t_start;
    e.sampler.record_every = record_every;
    e.sampler.rng_seed = attack_seed;
    e.workers = workers;
    e.mia_threshold = mia_threshold;
    e.iia_threshold = iia_threshold;
    e.occluding_random_patches = occ_random_patches;
    e.occluding_patch_size = occ_patch_size;
    e.preserving_masks = preserve_masks;
    return e;
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> kv;
    kv["dataset"] = dataset_dir;
    kv["checkpoint"] = checkpoint;
    kv["out"] = out_dir;
    kv["identities"] = std::to_string(identities);
    kv["images_per_identity"] = std::to_string(images_per_identity);
    kv["height"] = std::to_string(height);
    kv["width"] = std::to_string(width);
    kv["channels"] = std::to_string(channels);
    kv["split_fraction"] = fmt_double(split_fraction);
    kv["split_mode"] = split_mode;
    kv["jitter"] = fmt_double(jitter);
    kv["timesteps"] = std::to_string(timesteps);
    kv["beta_min"] = fmt_double(beta_min);
    kv["beta_max"] = fmt_double(beta_max);
    kv["epochs"] = std::to_string(epochs);
    kv["learning_rate"] = fmt_double(learning_rate);
    kv["hidden_dim"] = std::to_string(hidden_dim);
    kv["embed_dim"] = std::to_string(embed_dim);
    kv["sampler_kind"] = sampler_kind;
    kv["dea_sampler_kind"] = dea_sampler_kind;
    kv["t_start"] = std::to_string(t_start);
    kv["record_every"] = std::to_string(record_every);
    kv["mia_threshold"] = fmt_double(mia_threshold);
    kv["iia_threshold"] = fmt_double(iia_threshold);
    kv["occ_random_patches"] = std::to_string(occ_random_patches);
    kv["occ_patch_size"] = std::to_string(occ_patch_size);
    kv["preserve_masks"] = std::to_string(preserve_masks);
    kv["dea_samples"] = std::to_string(dea_samples);
    kv["dea_clusters"] = std::to_string(dea_clusters);
    kv["rmse_match_threshold"] = fmt_double(rmse_match_threshold);
    kv["profile"] = profile;
    kv["n_queries"] = std::to_string(n_queries);
    kv["n_runs"] = std::to_string(n_runs);
    kv["iia_query_counts"] = join_ints(iia_query_counts);
    kv["iia_identities_per_class"] = std::to_string(iia_identities_per_class);
    kv["sweep_t_starts"] = join_ints(sweep_t_starts);
    kv["eval_attack"] = eval_attack;
    kv["query"] = query;
    kv["identity"] = std::to_string(identity);
    kv["seed"] = std::to_string(seed);
    kv["dataset_seed"] = std::to_string(dataset_seed);
    kv["train_seed"] = std::to_string(train_seed);
    kv["attack_seed"] = std::to_string(attack_seed);
    // `workers` is intentionally omitted: results are worker-independent.
    return kv;
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [key, value] : kv) {
        if (key == "dataset") c.dataset_dir = value;
        else if (key == "checkpoint") c.checkpoint = value;
        else if (key == "out") c.out_dir = value;
        else if (key == "identities") c.identities = to_int(value, key);
        else if (key == "images_per_identity") c.images_per_identity = to_int(value, key);
        else if (key == "height") c.height = to_int(value, key);
        else if (key == "width") c.width = to_int(value, key);
        else if (key == "channels") c.channels = to_int(value, key);
        else if (key == "split_fraction") c.split_fraction = to_double(value, key);
        else if (key == "split_mode") c.split_mode = value;
        else if (key == "jitter") c.jitter = to_double(value, key);
        else if (key == "timesteps") c.timesteps = to_int(value, key);
        else if (key == "beta_min") c.beta_min = to_double(value, key);
        else if (key == "beta_max") c.beta_max = to_double(value, key);
        else if (key == "epochs") c.epochs = to_int(value, key);
        else if (key == "learning_rate") c.learning_rate = to_double(value, key);
        else if (key == "hidden_dim") c.hidden_dim = to_int(value, key);
        else if (key == "embed_dim") c.embed_dim = to_int(value, key);
        else if (key == "sampler_kind") c.sampler_kind = value;
        else if (key == "dea_sampler_kind") c.dea_sampler_kind = value;
        else if (key == "t_start") c.t_start = to_int(value, key);
        else if (key == "record_every") c.record_every = to_int(value, key);
        else if (key == "mia_threshold") c.mia_threshold = to_double(value, key);
        else if (key == "iia_threshold") c.iia_threshold = to_double(value, key);
        else if (key == "occ_random_patches") c.occ_random_patches = to_int(value, key);
        else if (key == "occ_patch_size") c.occ_patch_size = to_int(value, key);
        else if (key == "preserve_masks") c.preserve_masks = to_int(value, key);
        else if (key == "dea_samples") c.dea_samples = to_int(value, key);
        else if (key == "dea_clusters") c.dea_clusters = to_int(value, key);
        else if (key == "rmse_match_threshold") c.rmse_match_threshold = to_double(value, key);
        else if (key == "profile") c.profile = value;
        else if (key == "n_queries") c.n_queries = to_int(value, key);
        else if (key == "n_runs") c.n_runs = to_int(value, key);
        else if (key == "iia_query_counts") c.iia_query_counts = split_ints(value, key);
        else if (key == "iia_identities_per_class") c.iia_identities_per_class = to_int(value, key);
        else if (key == "sweep_t_starts") c.sweep_t_starts = split_ints(value, key);
        else if (key == "eval_attack") c.eval_attack = value;
        else if (key == "query") c.query = value;
        else if (key == "identity") c.identity = to_int(value, key);
        else if (key == "seed") c.seed = to_u64(value, key);
        else if (key == "dataset_seed") c.dataset_seed = to_u64(value, key);
        else if (key == "train_seed") c.train_seed = to_u64(value, key);
        else if (key == "attack_seed") c.attack_seed = to_u64(value, key);
        else if (key == "workers") c.workers = to_int(value, key);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    return c;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    for (const auto& [key, value] : to_map()) j[key] = value;
    return j;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        const auto end = line.find_last_not_of(" \t\r");
        line = line.substr(begin, end - begin + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " of " + path +
                              " is not key=value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto kend = key.find_last_not_of(" \t");
        key = key.substr(0, kend == std::string::npos ? 0 : kend + 1);
        const auto vbegin = value.find_first_not_of(" \t");
        value = vbegin == std::string::npos ? "" : value.substr(vbegin);
        kv[key] = value;
    }
    return kv;
}

void write_config_file(const RunConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("config: cannot write " + path);
    for (const auto& [key, value] : config.to_map()) out << key << "=" << value << "\n";
}

}  // namespace diffaudit
