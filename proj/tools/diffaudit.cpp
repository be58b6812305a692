// diffaudit: generate a synthetic face corpus, train a small diffusion
// model on it, and audit the model with membership inference, identity
// inference, and data extraction attacks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffaudit/attacks.hpp"
#include "diffaudit/checkpoint.hpp"
#include "diffaudit/config.hpp"
#include "diffaudit/errors.hpp"
#include "diffaudit/experiments.hpp"
#include "diffaudit/masks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace diffaudit;

namespace {

struct CommandContext {
    std::string config_path;
    std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, CommandContext& ctx,
                        std::initializer_list<std::pair<const char*, const char*>> extra) {
    cmd->add_option("--config", ctx.config_path, "key=value config file (flags override it)");
    auto bind = [cmd, &ctx](const std::string& flag, const std::string& key, const char* desc) {
        cmd->add_option_function<std::string>(
            flag, [&ctx, key](const std::string& v) { ctx.overrides[key] = v; }, desc);
    };
    bind("--seed", "seed", "master seed (other seeds derive from it)");
    bind("--workers", "workers", "worker threads, 0 = logical CPUs");
    bind("--out", "out", "output directory");
    for (const auto& [flag, key] : extra) bind(flag, key, key);
}

RunConfig resolve_config(const CommandContext& ctx) {
    std::map<std::string, std::string> kv;
    if (!ctx.config_path.empty()) kv = parse_config_file(ctx.config_path);
    for (const auto& [k, v] : ctx.overrides) kv[k] = v;
    RunConfig cfg = RunConfig::from_map(kv);
    cfg.resolve();
    return cfg;
}

void prepare_out(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    write_config_file(cfg, (fs::path(cfg.out_dir) / "run_config.cfg").string());
}

void write_report(const RunConfig& cfg, const std::string& command, json result) {
    json report;
    report["command"] = command;
    report["config"] = cfg.to_json();
    report["result"] = std::move(result);
    std::ofstream out(fs::path(cfg.out_dir) / "report.json");
    if (!out) throw DataError("cannot write report.json in " + cfg.out_dir);
    out << report.dump(2) << "\n";
}

const DatasetEntry& find_query(const FaceDataset& ds, const std::string& query) {
    if (query.empty()) throw ConfigError("missing --query (dataset image filename)");
    for (const auto& e : ds.entries) {
        if (e.filename == query) return e;
    }
    throw DataError("query image '" + query + "' not found in dataset");
}

json stats_to_json(const MaskStats& s) {
    return {{"mean", s.mean},
            {"stddev", s.stddev},
            {"cv", s.cv},
            {"skewness", s.skewness},
            {"mean_rate_of_change", s.mean_rate_of_change}};
}

json report_to_json(const MetricsReport& r) {
    json runs = json::array();
    for (const auto& m : r.per_run) {
        runs.push_back({{"accuracy", m.accuracy},
                        {"precision", m.precision},
                        {"recall", m.recall},
                        {"auc_roc", m.auc}});
    }
    return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
            {"auc_roc", r.auc},       {"threshold", r.threshold}, {"n_runs", r.n_runs},
            {"per_run", runs}};
}

SamplerConfig sampler_from(const RunConfig& cfg, SamplerKind kind) {
    SamplerConfig s;
    s.kind = kind;
    s.t_start = cfg.t_start;
    s.record_every = cfg.record_every;
    s.rng_seed = cfg.attack_seed;
    return s;
}

int cmd_generate(const RunConfig& cfg) {
    FaceDataset ds = generate_dataset(cfg.identities, cfg.images_per_identity, cfg.height, cfg.width,
                                      cfg.channels, cfg.split_fraction, cfg.parsed_split_mode(),
                                      cfg.dataset_seed, cfg.jitter);
    save_dataset(ds, cfg.out_dir);
    prepare_out(cfg);
    const auto n_train = ds.split_indices(Split::train).size();
    std::printf("generated %zu images (%zu train / %zu hold, %d identities) -> %s\n",
                ds.entries.size(), n_train, ds.entries.size() - n_train, cfg.identities,
                cfg.out_dir.c_str());
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.dataset_dir.empty()) throw ConfigError("missing --dataset");
    const FaceDataset ds = load_dataset(cfg.dataset_dir);
    const NoiseSchedule sched = make_linear_schedule(cfg.timesteps, cfg.beta_min, cfg.beta_max);
    TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.learning_rate = cfg.learning_rate;
    tc.hidden_dim = cfg.hidden_dim;
    tc.embed_dim = cfg.embed_dim;
    tc.seed = cfg.train_seed;
    tc.workers = cfg.workers;
    const TrainResult result = train(ds, sched, tc);
    prepare_out(cfg);
    save_checkpoint(result.model, sched, (fs::path(cfg.out_dir) / "checkpoint.dfa").string());
    save_loss_csv(result.loss_curve, (fs::path(cfg.out_dir) / "loss.csv").string());
    std::printf("trained %d epochs on %zu images, loss %.6f -> %.6f -> %s/checkpoint.dfa\n",
                cfg.epochs, ds.split_indices(Split::train).size(), result.loss_curve.front(),
                result.loss_curve.back(), cfg.out_dir.c_str());
    return 0;
}

int cmd_attack_mia(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("missing --checkpoint");
    auto [model, sched] = load_checkpoint(cfg.checkpoint);
    const FaceDataset ds = load_dataset(cfg.dataset_dir);
    const DatasetEntry& entry = find_query(ds, cfg.query);
    const MaskSuite suite =
        build_occluding_suite(entry.landmarks, ds.height, ds.width, cfg.occ_random_patches,
                              cfg.occ_patch_size, hash_combine(cfg.attack_seed, 0x0CC0000ULL));
    const MiaResult mia =
        mia_attack(entry.image, entry.landmarks, model, sched, suite,
                   sampler_from(cfg, cfg.parsed_sampler_kind()), cfg.mia_threshold, cfg.workers);

    prepare_out(cfg);
    json per_mask = json::array();
    for (const auto& [label, stats] : mia.per_mask) {
        json m = stats_to_json(stats);
        m["label"] = label;
        per_mask.push_back(std::move(m));
    }
    write_report(cfg, "attack-mia",
                 {{"query", entry.filename},
                  {"split", to_string(entry.split)},
                  {"confidence", mia.confidence},
                  {"member", mia.is_member},
                  {"threshold", mia.threshold},
                  {"per_mask", per_mask},
                  {"masks", suite_manifest(suite)}});
    std::printf("MIA %s: confidence %.4f -> %s (threshold %.2f)\n", entry.filename.c_str(),
                mia.confidence, mia.is_member ? "member" : "non-member", mia.threshold);
    return 0;
}

int cmd_attack_iia(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("missing --checkpoint");
    if (cfg.identity < 0) throw ConfigError("missing --identity");
    auto [model, sched] = load_checkpoint(cfg.checkpoint);
    const FaceDataset ds = load_dataset(cfg.dataset_dir);

    std::vector<Image> queries;
    std::vector<LandmarkMap> landmarks;
    for (const auto& e : ds.entries) {
        if (e.identity_id == cfg.identity) {
            queries.push_back(e.image);
            landmarks.push_back(e.landmarks);
        }
    }
    if (queries.empty()) {
        throw DataError("identity " + std::to_string(cfg.identity) + " not found in dataset");
    }
    const MaskSuite suite =
        build_occluding_suite(landmarks.front(), ds.height, ds.width, cfg.occ_random_patches,
                              cfg.occ_patch_size, hash_combine(cfg.attack_seed, 0x0CC0000ULL));
    const IiaResult iia =
        iia_attack(queries, landmarks, model, sched, suite, sampler_from(cfg, cfg.parsed_sampler_kind()),
                   cfg.iia_threshold, cfg.workers);

    prepare_out(cfg);
    json per_query = json::array();
    for (std::size_t q = 0; q < iia.per_query.size(); ++q) {
        per_query.push_back({{"mean_error", iia.per_query[q].first},
                             {"stddev_error", iia.per_query[q].second},
                             {"mask", iia.drawn_masks[q]}});
    }
    write_report(cfg, "attack-iia",
                 {{"identity", cfg.identity},
                  {"n_queries", queries.size()},
                  {"score", iia.score},
                  {"member", iia.is_member},
                  {"threshold", iia.threshold},
                  {"mean_error", iia.mu_overall},
                  {"stddev_error", iia.sigma_overall},
                  {"per_query", per_query}});
    std::printf("IIA identity %d (%zu queries): S_II %.4f -> %s (threshold %.2f)\n", cfg.identity,
                queries.size(), iia.score, iia.is_member ? "member" : "non-member", iia.threshold);
    return 0;
}

int cmd_attack_dea(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("missing --checkpoint");
    auto [model, sched] = load_checkpoint(cfg.checkpoint);
    const FaceDataset ds = load_dataset(cfg.dataset_dir);
    const DatasetEntry& entry = find_query(ds, cfg.query);

    const MaskSuite preserving =
        build_preserving_suite(entry.landmarks, ds.height, ds.width, cfg.preserve_masks,
                               hash_combine(cfg.attack_seed, 0x9E50000ULL));
    const ClusterResult extraction = extraction_attack(
        entry.image, entry.landmarks, model, sched, preserving, cfg.dea_samples, cfg.dea_clusters,
        sampler_from(cfg, cfg.parsed_dea_sampler_kind()), cfg.workers);

    prepare_out(cfg);
    const fs::path rep_dir = fs::path(cfg.out_dir) / "representatives";
    fs::create_directories(rep_dir);

    // Per-cluster MIA confidence for the manifest.
    const MaskSuite occluding =
        build_occluding_suite(entry.landmarks, ds.height, ds.width, cfg.occ_random_patches,
                              cfg.occ_patch_size, hash_combine(cfg.attack_seed, 0x0CC0000ULL));
    json clusters = json::array();
    char name[32];
    for (int c = 0; c < extraction.k; ++c) {
        std::snprintf(name, sizeof(name), "rep_%02d.%s", c, ds.channels == 1 ? "pgm" : "ppm");
        write_pnm(extraction.representatives[c], (rep_dir / name).string());
        const MiaResult mia =
            mia_attack(extraction.representatives[c], entry.landmarks, model, sched, occluding,
                       sampler_from(cfg, cfg.parsed_sampler_kind()), cfg.mia_threshold, cfg.workers);
        long long size = 0;
        for (int a : extraction.assignments) size += a == c;
        clusters.push_back({{"index", c},
                            {"file", std::string("representatives/") + name},
                            {"size", size},
                            {"mia_confidence", mia.confidence}});
    }
    json manifest = {{"inertia", extraction.inertia},
                     {"iterations", extraction.iterations},
                     {"clusters", clusters}};
    std::ofstream mf(rep_dir / "manifest.json");
    if (!mf) throw DataError("cannot write representatives manifest in " + cfg.out_dir);
    mf << manifest.dump(2) << "\n";

    write_report(cfg, "attack-dea",
                 {{"query", entry.filename},
                  {"n_samples", cfg.dea_samples},
                  {"clusters", cfg.dea_clusters},
                  {"inertia", extraction.inertia},
                  {"manifest", manifest}});
    std::printf("DEA %s: %d samples -> %d representatives (inertia %.4f) -> %s\n",
                entry.filename.c_str(), cfg.dea_samples, cfg.dea_clusters, extraction.inertia,
                rep_dir.string().c_str());
    return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("missing --checkpoint");
    auto [model, sched] = load_checkpoint(cfg.checkpoint);
    const ExperimentConfig ecfg = [&] {
        ExperimentConfig e = cfg.experiment_config();
        if (cfg.eval_attack == "dea") e.sampler.kind = cfg.parsed_dea_sampler_kind();
        return e;
    }();
    prepare_out(cfg);

    if (cfg.eval_attack == "mia") {
        const FaceDataset ds = load_dataset(cfg.dataset_dir);
        const MetricsReport report =
            run_mia_experiment(ds, model, sched, ecfg, cfg.n_queries, cfg.n_runs, cfg.attack_seed);
        write_metrics_csv(report, (fs::path(cfg.out_dir) / "metrics.csv").string());
        write_report(cfg, "evaluate", {{"attack", "mia"}, {"metrics", report_to_json(report)}});
        std::printf("MIA evaluation: mean accuracy %.4f, AUC-ROC %.4f over %d runs -> %s\n",
                    report.accuracy, report.auc, report.n_runs, cfg.out_dir.c_str());
        return 0;
    }
    if (cfg.eval_attack == "iia") {
        // Identity inference needs fresh renders of known identities, so the
        // corpus is rebuilt from the embedded generation settings rather
        // than read back from disk.
        if (cfg.parsed_split_mode() != SplitMode::identity_disjoint) {
            throw ConfigError("evaluate --eval_attack iia requires split_mode=identity_disjoint");
        }
        const FaceDataset ds = generate_dataset(cfg.identities, cfg.images_per_identity, cfg.height,
                                                cfg.width, cfg.channels, cfg.split_fraction,
                                                SplitMode::identity_disjoint, cfg.dataset_seed,
                                                cfg.jitter);
        if (ds.height != model.height || ds.width != model.width || ds.channels != model.channels) {
            throw DataError("evaluate: checkpoint shape does not match the configured corpus");
        }
        const auto reports = run_iia_experiment(ds, model, sched, ecfg, cfg.iia_query_counts,
                                                cfg.iia_identities_per_class, cfg.n_runs,
                                                cfg.attack_seed);
        json by_count = json::array();
        for (const auto& [count, report] : reports) {
            char fname[48];
            std::snprintf(fname, sizeof(fname), "metrics_q%02d.csv", count);
            write_metrics_csv(report, (fs::path(cfg.out_dir) / fname).string());
            by_count.push_back({{"query_count", count}, {"metrics", report_to_json(report)}});
        }
        write_report(cfg, "evaluate", {{"attack", "iia"}, {"by_query_count", by_count}});
        std::printf("IIA evaluation: %zu query counts, %d runs each -> %s\n", reports.size(),
                    cfg.n_runs, cfg.out_dir.c_str());
        return 0;
    }
    if (cfg.eval_attack == "dea") {
        const FaceDataset ds = load_dataset(cfg.dataset_dir);
        const ExtractionRates rates = run_extraction_experiment(
            ds, model, sched, ecfg, cfg.n_queries, cfg.rmse_match_threshold, cfg.mia_threshold,
            cfg.dea_samples, cfg.dea_clusters, cfg.attack_seed);
        std::ofstream csv(fs::path(cfg.out_dir) / "asr.csv");
        char buf[96];
        std::snprintf(buf, sizeof(buf), "metric,run,value\nasr_one,mean,%.17g\nasr_mia,mean,%.17g\n",
                      rates.asr_one, rates.asr_mia);
        csv << buf;
        write_report(cfg, "evaluate",
                     {{"attack", "dea"}, {"asr_one", rates.asr_one}, {"asr_mia", rates.asr_mia}});
        std::printf("DEA evaluation: ASR-one %.3f, ASR-MIA %.3f over %d queries -> %s\n",
                    rates.asr_one, rates.asr_mia, cfg.n_queries, cfg.out_dir.c_str());
        return 0;
    }
    throw ConfigError("eval_attack must be one of mia|iia|dea, got '" + cfg.eval_attack + "'");
}

int cmd_sweep(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("missing --checkpoint");
    if (cfg.sweep_t_starts.empty()) throw ConfigError("missing --t-starts (e.g. 10,100,190)");
    auto [model, sched] = load_checkpoint(cfg.checkpoint);
    const FaceDataset ds = load_dataset(cfg.dataset_dir);

    const auto rows = sweep_timesteps(cfg.sweep_t_starts, sched.timesteps, [&](int t) {
        ExperimentConfig e = cfg.experiment_config();
        e.sampler.t_start = t;
        return run_mia_experiment(ds, model, sched, e, cfg.n_queries, cfg.n_runs, cfg.attack_seed);
    });

    prepare_out(cfg);
    write_sweep_csv(rows, (fs::path(cfg.out_dir) / "sweep.csv").string());
    write_sweep_dat(rows, (fs::path(cfg.out_dir) / "sweep.dat").string());
    json jrows = json::array();
    for (const auto& [t, report] : rows) {
        jrows.push_back({{"t_start", t}, {"metrics", report_to_json(report)}});
    }
    write_report(cfg, "sweep", {{"attack", "mia"}, {"rows", jrows}});
    std::printf("sweep over %zu t_start values -> %s/sweep.csv\n", rows.size(), cfg.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffaudit: white-box privacy audit for small diffusion models"};
    app.require_subcommand(1);

    CommandContext ctx;
    auto* generate = app.add_subcommand("generate", "render a synthetic face corpus");
    add_config_options(generate, ctx,
                       {{"--identities", "identities"},
                        {"--images-per-identity", "images_per_identity"},
                        {"--height", "height"},
                        {"--width", "width"},
                        {"--channels", "channels"},
                        {"--split-fraction", "split_fraction"},
                        {"--split-mode", "split_mode"},
                        {"--jitter", "jitter"}});

    auto* train_cmd = app.add_subcommand("train", "train the denoiser on a dataset");
    add_config_options(train_cmd, ctx,
                       {{"--dataset", "dataset"},
                        {"--epochs", "epochs"},
                        {"--lr", "learning_rate"},
                        {"--hidden", "hidden_dim"},
                        {"--embed", "embed_dim"},
                        {"--timesteps", "timesteps"},
                        {"--beta-min", "beta_min"},
                        {"--beta-max", "beta_max"}});

    const std::initializer_list<std::pair<const char*, const char*>> attack_opts = {
        {"--dataset", "dataset"},   {"--checkpoint", "checkpoint"},
        {"--query", "query"},       {"--identity", "identity"},
        {"--t-start", "t_start"},   {"--record-every", "record_every"},
        {"--threshold", "mia_threshold"}, {"--iia-threshold", "iia_threshold"},
        {"--sampler", "sampler_kind"},    {"--samples", "dea_samples"},
        {"--clusters", "dea_clusters"}};
    auto* mia = app.add_subcommand("attack-mia", "membership inference on one query image");
    add_config_options(mia, ctx, attack_opts);
    auto* iia = app.add_subcommand("attack-iia", "identity inference on one identity");
    add_config_options(iia, ctx, attack_opts);
    auto* dea = app.add_subcommand("attack-dea", "data extraction for one query image");
    add_config_options(dea, ctx, attack_opts);

    auto* evaluate = app.add_subcommand("evaluate", "run a full attack evaluation");
    add_config_options(evaluate, ctx,
                       {{"--dataset", "dataset"},
                        {"--checkpoint", "checkpoint"},
                        {"--attack", "eval_attack"},
                        {"--profile", "profile"},
                        {"--n-queries", "n_queries"},
                        {"--n-runs", "n_runs"},
                        {"--t-start", "t_start"},
                        {"--identities", "identities"},
                        {"--images-per-identity", "images_per_identity"},
                        {"--split-mode", "split_mode"},
                        {"--query-counts", "iia_query_counts"}});

    auto* sweep = app.add_subcommand("sweep", "rerun the MIA evaluation over t_start values");
    add_config_options(sweep, ctx,
                       {{"--dataset", "dataset"},
                        {"--checkpoint", "checkpoint"},
                        {"--t-starts", "sweep_t_starts"},
                        {"--n-queries", "n_queries"},
                        {"--n-runs", "n_runs"}});

    try {
        app.parse(argc, argv);
        const RunConfig cfg = resolve_config(ctx);
        if (generate->parsed()) return cmd_generate(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (mia->parsed()) return cmd_attack_mia(cfg);
        if (iia->parsed()) return cmd_attack_iia(cfg);
        if (dea->parsed()) return cmd_attack_dea(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg);
        throw ConfigError("no command selected");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
}
