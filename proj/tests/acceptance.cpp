// Acceptance suite: end-to-end checks of the statistics oracles, diffusion
// correctness, desk-scale attack reproductions, and artifact reproducibility.
// Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "diffaudit/attacks.hpp"
#include "diffaudit/checkpoint.hpp"
#include "diffaudit/experiments.hpp"
#include "diffaudit/parallel.hpp"
#include "diffaudit/rng.hpp"

namespace fs = std::filesystem;
using namespace diffaudit;
using Clock = std::chrono::steady_clock;

namespace {

int g_workers = default_workers();
std::string g_cli;

struct Outcome {
    int criterion;
    bool pass;
    std::string detail;
    double seconds;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void progress(const std::string& msg) { std::fprintf(stderr, "[acceptance] %s\n", msg.c_str()); }

// ---------------------------------------------------------------------------
// criterion 1: statistics oracles
// ---------------------------------------------------------------------------

MaskStats stats_oracle(const std::vector<double>& e) {
    MaskStats s;
    const double n = static_cast<double>(e.size());
    for (double v : e) s.mean += v / n;
    if (s.mean == 0.0) return s;
    double var = 0.0;
    for (double v : e) var += (v - s.mean) * (v - s.mean) / n;
    s.stddev = std::sqrt(var);
    s.cv = s.stddev / s.mean;
    if (s.stddev > 0.0) {
        for (double v : e) s.skewness += std::pow((v - s.mean) / s.stddev, 3.0) / n;
    }
    for (std::size_t i = 1; i < e.size(); ++i) {
        s.mean_rate_of_change += std::fabs(e[i] - e[i - 1]) / (n - 1.0);
    }
    return s;
}

double auc_oracle(const std::vector<LabeledScore>& scores) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (const auto& p : scores) {
        if (p.truth != Truth::member) continue;
        for (const auto& q : scores) {
            if (q.truth != Truth::nonmember) continue;
            ++pairs;
            if (p.score > q.score) wins += 1.0;
            else if (p.score == q.score) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

Outcome criterion_1() {
    const auto start = Clock::now();
    Rng rng(0xC1);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int len = 10 + static_cast<int>(rng.next_below(40));
        std::vector<double> values(len);
        for (double& v : values) v = rng.next_double() * 2.0;
        LossTrajectory traj;
        traj.mask_label = "acc";
        int t = len;
        for (double v : values) traj.errors.emplace_back(t--, v);
        const MaskStats got = trajectory_stats(traj);
        const MaskStats want = stats_oracle(values);
        worst = std::max({worst, std::fabs(got.cv - want.cv), std::fabs(got.skewness - want.skewness),
                          std::fabs(got.mean_rate_of_change - want.mean_rate_of_change)});

        // confidence aggregation against a direct recomputation
        std::vector<MaskStats> stats;
        double acc = 0.0;
        const int n_masks = 1 + static_cast<int>(rng.next_below(12));
        for (int m = 0; m < n_masks; ++m) {
            MaskStats s;
            s.cv = rng.next_double();
            s.skewness = rng.next_double() * 2.0 - 1.0;
            s.mean_rate_of_change = rng.next_double();
            stats.push_back(s);
            acc += s.cv + std::fabs(s.skewness) + s.mean_rate_of_change;
        }
        const double c_direct = 1.0 / (1.0 + acc / n_masks);
        worst = std::max(worst, std::fabs(mia_confidence_from_stats(stats) - c_direct));

        const double mu = rng.next_double() * 2.0, sigma = rng.next_double();
        worst = std::max(worst, std::fabs(iia_score(mu, sigma) - std::exp(-(sigma + mu))));

        // AUC against the all-pairs oracle on a fresh labeled set
        std::vector<LabeledScore> scores;
        for (int i = 0; i < 60; ++i) {
            const double s = std::floor(rng.next_double() * 25.0) / 25.0;
            scores.push_back({s, i % 3 == 0 ? Truth::nonmember : Truth::member, ""});
        }
        worst = std::max(worst, std::fabs(auc_roc(scores) - auc_oracle(scores)));
    }
    const double secs = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "max |impl - oracle| = %.3g over 1000 randomized inputs (limit 1e-9), %.1fs",
                  worst, secs);
    return {1, worst <= 1e-9 && secs < 10.0, detail, secs};
}

// ---------------------------------------------------------------------------
// criterion 2: forward-marginal Monte Carlo + gradient check
// ---------------------------------------------------------------------------

Outcome criterion_2() {
    const auto start = Clock::now();
    // Monte-Carlo check of the closed-form forward marginal on an 8x8 image.
    const int T = 20, t = 10, trials = 10000;
    const auto sched = make_linear_schedule(T, 1e-3, 0.05);
    Rng rng(0xC2);
    Image x0(8, 8, 1);
    for (double& p : x0.pixels) p = rng.next_double();

    const std::size_t n = x0.pixels.size();
    std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> x = x0.pixels;
        for (int step = 1; step <= t; ++step) {
            const double keep = std::sqrt(1.0 - sched.beta_at(step));
            const double add = std::sqrt(sched.beta_at(step));
            for (auto& v : x) v = keep * v + add * rng.next_gaussian();
        }
        for (std::size_t i = 0; i < n; ++i) {
            sum[i] += x[i];
            sum_sq[i] += x[i] * x[i];
        }
    }
    const double sab = std::sqrt(sched.alpha_bar_at(t));
    double mean_err_sq = 0.0, mean_norm_sq = 0.0, var_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = sum[i] / trials;
        const double var = sum_sq[i] / trials - mean * mean;
        mean_err_sq += (mean - sab * x0.pixels[i]) * (mean - sab * x0.pixels[i]);
        mean_norm_sq += sab * x0.pixels[i] * sab * x0.pixels[i];
        var_mean += var / static_cast<double>(n);
    }
    const double mean_rel = std::sqrt(mean_err_sq / mean_norm_sq);
    const double var_rel =
        std::fabs(var_mean - (1.0 - sched.alpha_bar_at(t))) / (1.0 - sched.alpha_bar_at(t));

    // Analytic vs central-difference gradients, width-8 network on 4x4.
    const auto gsched = make_linear_schedule(10, 1e-2, 0.05);
    Denoiser model = Denoiser::init(4, 4, 1, 8, 8, 0xC2);
    Image gx0(4, 4, 1);
    for (double& p : gx0.pixels) p = rng.next_double();
    const Image eps_a = gaussian_image(4, 4, 1, rng);
    const Image eps_b = gaussian_image(4, 4, 1, rng);
    const std::vector<NoiseSample> batch = {{&gx0, 2, &eps_a}, {&gx0, 9, &eps_b}};
    std::vector<double> grad;
    loss_and_gradient(model, gsched, batch, grad);

    std::vector<double> flat = model.flatten_params();
    double worst_grad = 0.0;
    const double h = 1e-4;
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double keep = flat[i];
        Denoiser probe = model;
        flat[i] = keep + h;
        probe.unflatten_params(flat);
        std::vector<double> g;
        const double up = loss_and_gradient(probe, gsched, batch, g);
        flat[i] = keep - h;
        probe.unflatten_params(flat);
        const double down = loss_and_gradient(probe, gsched, batch, g);
        flat[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({1e-8, std::fabs(numeric), std::fabs(grad[i])});
        worst_grad = std::max(worst_grad, std::fabs(grad[i] - numeric) / scale);
    }

    const double secs = seconds_since(start);
    const bool pass = mean_rel < 0.02 && var_rel < 0.02 && worst_grad <= 1e-3 && secs < 60.0;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "marginal mean err %.4f%%, var err %.4f%% (limit 2%%); grad rel err %.2e "
                  "(limit 1e-3), %.1fs",
                  100.0 * mean_rel, 100.0 * var_rel, worst_grad, secs);
    return {2, pass, detail, secs};
}

// ---------------------------------------------------------------------------
// shared desk-scale models
// ---------------------------------------------------------------------------

struct TrainedSetup {
    FaceDataset dataset;
    NoiseSchedule sched;
    Denoiser model;
};

TrainedSetup train_setup(int identities, int per_identity, SplitMode mode, std::uint64_t seed,
                         int epochs, const char* tag) {
    TrainedSetup s{generate_dataset(identities, per_identity, 32, 32, 1, 0.6, mode, seed),
                   make_linear_schedule(200, 1e-4, 0.02), {}};
    TrainConfig tc;
    tc.epochs = epochs;
    tc.hidden_dim = 256;
    tc.embed_dim = 32;
    tc.learning_rate = 1e-3;
    tc.seed = hash_combine(seed, 0x7241ULL);
    tc.workers = g_workers;
    progress(std::string("training model ") + tag + " (" +
             std::to_string(s.dataset.split_indices(Split::train).size()) + " images, " +
             std::to_string(epochs) + " epochs)...");
    const auto start = Clock::now();
    TrainResult tr = train(s.dataset, s.sched, tc);
    progress(std::string("model ") + tag + " trained in " +
             std::to_string(static_cast<int>(seconds_since(start))) + "s, loss " +
             std::to_string(tr.loss_curve.front()) + " -> " + std::to_string(tr.loss_curve.back()));
    s.model = std::move(tr.model);
    return s;
}

// ---------------------------------------------------------------------------
// criterion 3: memorization smoke test
// ---------------------------------------------------------------------------

double mean_reconstruction_rmse(const TrainedSetup& s, Split split) {
    const auto idx = s.dataset.split_indices(split);
    SamplerConfig cfg;
    cfg.kind = SamplerKind::deterministic;
    cfg.t_start = s.sched.timesteps / 2;
    cfg.record_every = 1;
    std::vector<double> errs(idx.size());
    parallel_for(idx.size(), g_workers, [&](std::size_t i) {
        const auto& e = s.dataset.entries[idx[i]];
        SamplerConfig c = cfg;
        c.rng_seed = hash_combine(0xACC3ULL, content_hash(e.image));
        const Image out =
            reconstruct_final(e.image, PixelMask::full(32, 32), s.model, s.sched, c);
        errs[i] = rmse(clamp01(out), e.image);
    });
    double acc = 0.0;
    for (double e : errs) acc += e;
    return acc / static_cast<double>(errs.size());
}

Outcome criterion_3(const TrainedSetup& a) {
    const auto start = Clock::now();
    const double train_rmse = mean_reconstruction_rmse(a, Split::train);
    const double hold_rmse = mean_reconstruction_rmse(a, Split::hold);
    const double gap = hold_rmse - train_rmse;
    const double secs = seconds_since(start);
    const bool pass = train_rmse <= 0.15 && gap > 0.0 && gap <= 0.35;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "train RMSE %.4f (limit 0.15), holdout RMSE %.4f, gap %.4f (in (0, 0.35]), %.1fs",
                  train_rmse, hold_rmse, gap, secs);
    return {3, pass, detail, secs};
}

// ---------------------------------------------------------------------------
// criterion 4: MIA desk-scale reproduction
// ---------------------------------------------------------------------------

ExperimentConfig default_experiment() {
    ExperimentConfig e;
    e.sampler.kind = SamplerKind::deterministic;
    e.sampler.rng_seed = 0xA77AC4ULL;
    e.workers = g_workers;
    return e;
}

Outcome criterion_4(const TrainedSetup& a) {
    const auto start = Clock::now();
    const ExperimentConfig ecfg = default_experiment();
    const MetricsReport trained =
        run_mia_experiment(a.dataset, a.model, a.sched, ecfg, 20, 7, 0xE4ULL);
    progress("criterion 4: trained-model MIA AUC " + std::to_string(trained.auc));
    const Denoiser fresh = Denoiser::init(32, 32, 1, 32, 256, 0xF4E5EEDULL);
    const MetricsReport untrained =
        run_mia_experiment(a.dataset, fresh, a.sched, ecfg, 20, 7, 0xE4ULL);
    const double secs = seconds_since(start);
    const bool pass = trained.auc >= 0.65 && untrained.auc >= 0.4 && untrained.auc <= 0.6;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "trained AUC %.4f (limit >= 0.65), untrained AUC %.4f (in [0.4, 0.6]), %.1fs",
                  trained.auc, untrained.auc, secs);
    return {4, pass, detail, secs};
}

// ---------------------------------------------------------------------------
// criterion 5: IIA desk-scale reproduction
// ---------------------------------------------------------------------------

Outcome criterion_5(const TrainedSetup& b) {
    const auto start = Clock::now();
    const ExperimentConfig ecfg = default_experiment();
    const std::vector<int> counts = {1, 5};
    const auto reports = run_iia_experiment(b.dataset, b.model, b.sched, ecfg, counts, 8, 7, 0xE5ULL);
    const double auc1 = reports[0].second.auc;
    const double auc5 = reports[1].second.auc;
    const double secs = seconds_since(start);
    const bool pass = auc5 >= 0.65 && auc5 >= auc1 - 0.05;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "AUC(K=5) %.4f (limit >= 0.65), AUC(K=1) %.4f, trend AUC5 >= AUC1 - 0.05, %.1fs",
                  auc5, auc1, secs);
    return {5, pass, detail, secs};
}

// ---------------------------------------------------------------------------
// criterion 6: timestep sweep
// ---------------------------------------------------------------------------

Outcome criterion_6(const TrainedSetup& a) {
    const auto start = Clock::now();
    const int T = a.sched.timesteps;
    const std::vector<int> values = {T / 20, T / 2, 19 * T / 20};
    const auto rows = sweep_timesteps(values, T, [&](int t) {
        ExperimentConfig e = default_experiment();
        e.sampler.t_start = t;
        e.sampler.record_every = 0;  // re-derive from t_start
        return run_mia_experiment(a.dataset, a.model, a.sched, e, 20, 7, 0xE6ULL);
    });
    const double low = rows[0].second.auc, mid = rows[1].second.auc, high = rows[2].second.auc;
    const double secs = seconds_since(start);
    const bool pass = mid >= low - 0.05 && mid >= high - 0.05;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "AUC @ t=%d: %.4f, @ t=%d: %.4f, @ t=%d: %.4f (mid >= extremes - 0.05), %.1fs",
                  values[0], low, values[1], mid, values[2], high, secs);
    return {6, pass, detail, secs};
}

// ---------------------------------------------------------------------------
// criterion 7: extraction attack
// ---------------------------------------------------------------------------

Outcome criterion_7(const TrainedSetup& c) {
    const auto start = Clock::now();
    ExperimentConfig ecfg = default_experiment();
    ecfg.sampler.kind = SamplerKind::ancestral;
    const ExtractionRates trained = run_extraction_experiment(c.dataset, c.model, c.sched, ecfg, 10,
                                                              0.15, 0.6, 100, 10, 0xE7ULL);
    progress("criterion 7: trained ASR-one " + std::to_string(trained.asr_one) + ", ASR-MIA " +
             std::to_string(trained.asr_mia));
    const Denoiser fresh = Denoiser::init(32, 32, 1, 32, 256, 0xF7E5EEDULL);
    const ExtractionRates untrained = run_extraction_experiment(c.dataset, fresh, c.sched, ecfg, 10,
                                                                0.15, 0.6, 100, 10, 0xE7ULL);
    const double secs = seconds_since(start);
    const bool pass = trained.asr_one >= 0.5 && trained.asr_one > untrained.asr_one;
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "trained ASR-one %.2f (limit >= 0.5), untrained ASR-one %.2f, ASR-MIA %.2f, %.1fs",
                  trained.asr_one, untrained.asr_one, trained.asr_mia, secs);
    return {7, pass, detail, secs};
}

// ---------------------------------------------------------------------------
// criterion 8: k-means properties
// ---------------------------------------------------------------------------

Outcome criterion_8() {
    const auto start = Clock::now();
    Rng rng(0xE8);
    bool monotone = true, exact = true, deterministic = true;

    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<double>> pts;
        const int n = 20 + static_cast<int>(rng.next_below(60));
        for (int i = 0; i < n; ++i) {
            pts.push_back({rng.next_double() * 5.0, rng.next_double() * 5.0, rng.next_double()});
        }
        const int k = 2 + static_cast<int>(rng.next_below(6));
        const ClusterResult r = kmeans(pts, k, 100, trial);
        for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
            monotone &= r.inertia_history[i] <= r.inertia_history[i - 1] + 1e-12;
        }
    }

    for (int trial = 0; trial < 25; ++trial) {
        std::vector<std::vector<double>> pts;
        for (int b = 0; b < 2; ++b) {
            for (int i = 0; i < 12; ++i) {
                pts.push_back({b * 12.0 + 0.2 * rng.next_gaussian(),
                               b * 12.0 + 0.2 * rng.next_gaussian()});
            }
        }
        const ClusterResult r = kmeans(pts, 2, 100, 5000 + trial);
        const int first = r.assignments[0];
        for (int i = 0; i < 12; ++i) exact &= r.assignments[i] == first;
        for (int i = 12; i < 24; ++i) exact &= r.assignments[i] == 1 - first;

        const ClusterResult again = kmeans(pts, 2, 100, 5000 + trial);
        deterministic &= again.assignments == r.assignments && again.inertia == r.inertia;
    }

    const double secs = seconds_since(start);
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "inertia monotone: %s, separated-blob recovery: %s, seeded determinism: %s, %.1fs",
                  monotone ? "yes" : "NO", exact ? "yes" : "NO", deterministic ? "yes" : "NO", secs);
    return {8, monotone && exact && deterministic, detail, secs};
}

// ---------------------------------------------------------------------------
// criterion 9: CLI reproducibility
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = g_cli + " " + args + " >> " + log.string() + " 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

Outcome criterion_9() {
    const auto start = Clock::now();
    if (g_cli.empty()) return {9, false, "no --cli path given", 0.0};

    const fs::path tmp = fs::temp_directory_path() / "diffaudit_acceptance_cli";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    const fs::path log = tmp / "log.txt";
    const std::string data = (tmp / "data").string();
    const std::string model = (tmp / "model").string();
    const std::string attack = (tmp / "attack").string();

    bool ok = true;
    ok &= run_cli("generate --identities 4 --images-per-identity 2 --seed 31 --out " + data, log) == 0;
    ok &= run_cli("train --dataset " + data +
                      " --epochs 25 --hidden 24 --embed 8 --timesteps 16 --seed 31 --out " + model,
                  log) == 0;
    ok &= run_cli("attack-mia --dataset " + data + " --checkpoint " + model +
                      "/checkpoint.dfa --query img_00001.pgm --seed 31 --out " + attack,
                  log) == 0;
    if (!ok) return {9, false, "CLI pipeline failed, see " + log.string(), seconds_since(start)};

    const std::string original = slurp(fs::path(attack) / "report.json");
    const std::string cfg = attack + "/run_config.cfg";

    ok &= run_cli("attack-mia --config " + cfg + " --workers 1", log) == 0;
    const bool same_w1 = slurp(fs::path(attack) / "report.json") == original;
    ok &= run_cli("attack-mia --config " + cfg + " --workers 4", log) == 0;
    const bool same_w4 = slurp(fs::path(attack) / "report.json") == original;

    fs::remove_all(tmp);
    const double secs = seconds_since(start);
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "report re-run from embedded config: workers=1 identical: %s, workers=4: %s, %.1fs",
                  same_w1 ? "yes" : "NO", same_w4 ? "yes" : "NO", secs);
    return {9, ok && same_w1 && same_w4 && !original.empty(), detail, secs};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) g_cli = argv[++i];
        else if (arg == "--workers" && i + 1 < argc) g_workers = std::atoi(argv[++i]);
        else if (arg == "--criterion" && i + 1 < argc) selected.insert(std::atoi(argv[++i]));
    }
    auto wanted = [&](int c) { return selected.empty() || selected.count(c); };

    std::vector<Outcome> outcomes;
    if (wanted(1)) outcomes.push_back(criterion_1());
    if (wanted(2)) outcomes.push_back(criterion_2());
    if (wanted(8)) outcomes.push_back(criterion_8());
    if (wanted(9)) outcomes.push_back(criterion_9());

    if (wanted(3) || wanted(4) || wanted(6)) {
        const TrainedSetup a =
            train_setup(16, 4, SplitMode::image_level, 0xA11CEULL, 2500, "A (MIA corpus)");
        if (wanted(3)) outcomes.push_back(criterion_3(a));
        if (wanted(4)) outcomes.push_back(criterion_4(a));
        if (wanted(6)) outcomes.push_back(criterion_6(a));
    }
    if (wanted(5)) {
        const TrainedSetup b =
            train_setup(16, 4, SplitMode::identity_disjoint, 0xB0BULL, 2500, "B (IIA corpus)");
        outcomes.push_back(criterion_5(b));
    }
    if (wanted(7)) {
        const TrainedSetup c =
            train_setup(4, 8, SplitMode::image_level, 0xCAFEULL, 4000, "C (DEA corpus)");
        outcomes.push_back(criterion_7(c));
    }

    std::sort(outcomes.begin(), outcomes.end(),
              [](const Outcome& x, const Outcome& y) { return x.criterion < y.criterion; });
    bool all_pass = true;
    for (const auto& o : outcomes) {
        std::printf("criterion %d: %s - %s\n", o.criterion, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        all_pass &= o.pass;
    }
    return all_pass ? 0 : 1;
}
