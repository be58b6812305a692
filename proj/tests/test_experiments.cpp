#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "diffaudit/errors.hpp"
#include "diffaudit/experiments.hpp"

using namespace diffaudit;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    NoiseSchedule sched = make_linear_schedule(16, 1e-3, 0.05);
    FaceDataset image_level = generate_dataset(6, 2, 32, 32, 1, 0.5, SplitMode::image_level, 600);
    FaceDataset disjoint = generate_dataset(6, 2, 32, 32, 1, 0.5, SplitMode::identity_disjoint, 601);
    Denoiser model = Denoiser::init(32, 32, 1, 8, 24, 3);
    ExperimentConfig ecfg;

    Fixture() {
        ecfg.sampler.kind = SamplerKind::deterministic;
        ecfg.sampler.t_start = 8;
        ecfg.sampler.record_every = 2;
        ecfg.sampler.rng_seed = 42;
        ecfg.workers = 2;
        ecfg.preserving_masks = 3;
    }
};

}  // namespace

TEST_CASE("mia experiment bookkeeping: per-run rows plus mean, deterministic") {
    Fixture f;
    const MetricsReport a = run_mia_experiment(f.image_level, f.model, f.sched, f.ecfg, 4, 3, 9);
    CHECK(a.n_runs == 3);
    CHECK(a.per_run.size() == 3);
    double acc = 0.0;
    for (const auto& r : a.per_run) acc += r.accuracy;
    CHECK(a.accuracy == doctest::Approx(acc / 3.0));
    CHECK(a.threshold == doctest::Approx(0.6));

    const MetricsReport b = run_mia_experiment(f.image_level, f.model, f.sched, f.ecfg, 4, 3, 9);
    REQUIRE(b.per_run.size() == a.per_run.size());
    for (std::size_t i = 0; i < a.per_run.size(); ++i) {
        CHECK(a.per_run[i].accuracy == b.per_run[i].accuracy);
        CHECK(a.per_run[i].auc == b.per_run[i].auc);
    }

    // worker-count independence
    ExperimentConfig one_worker = f.ecfg;
    one_worker.workers = 1;
    const MetricsReport c =
        run_mia_experiment(f.image_level, f.model, f.sched, one_worker, 4, 3, 9);
    CHECK(c.auc == a.auc);
    CHECK(c.accuracy == a.accuracy);
}

TEST_CASE("mia experiment rejects undersized splits") {
    Fixture f;
    CHECK_THROWS_AS(run_mia_experiment(f.image_level, f.model, f.sched, f.ecfg, 40, 1, 9),
                    DataError);
}

TEST_CASE("iia experiment returns one report per query count") {
    Fixture f;
    const std::vector<int> counts = {1, 2};
    const auto reports =
        run_iia_experiment(f.disjoint, f.model, f.sched, f.ecfg, counts, 2, 2, 11);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].first == 1);
    CHECK(reports[1].first == 2);
    for (const auto& [count, rep] : reports) {
        CHECK(rep.n_runs == 2);
        CHECK(rep.per_run.size() == 2);
        CHECK(rep.threshold == doctest::Approx(0.5));
    }

    // deterministic given the seed
    const auto again = run_iia_experiment(f.disjoint, f.model, f.sched, f.ecfg, counts, 2, 2, 11);
    CHECK(again[0].second.auc == reports[0].second.auc);
    CHECK(again[1].second.accuracy == reports[1].second.accuracy);
}

TEST_CASE("iia experiment demands an identity-disjoint synthetic corpus") {
    Fixture f;
    const std::vector<int> counts = {1};
    CHECK_THROWS_AS(run_iia_experiment(f.image_level, f.model, f.sched, f.ecfg, counts, 2, 1, 1),
                    ConfigError);
    FaceDataset no_meta = f.disjoint;
    no_meta.gen.available = false;
    CHECK_THROWS_AS(run_iia_experiment(no_meta, f.model, f.sched, f.ecfg, counts, 2, 1, 1),
                    DataError);
    CHECK_THROWS_AS(run_iia_experiment(f.disjoint, f.model, f.sched, f.ecfg, counts, 50, 1, 1),
                    DataError);
}

TEST_CASE("extraction experiment rates are in [0,1] and threshold extremes behave") {
    Fixture f;
    // huge match threshold: every clamped representative is within reach
    const ExtractionRates loose = run_extraction_experiment(f.image_level, f.model, f.sched, f.ecfg,
                                                            2, 1.0, 0.6, 4, 2, 21);
    CHECK(loose.asr_one == doctest::Approx(1.0));
    // zero threshold: noisy generations never match exactly
    const ExtractionRates strict = run_extraction_experiment(f.image_level, f.model, f.sched, f.ecfg,
                                                             2, 0.0, 0.6, 4, 2, 21);
    CHECK(strict.asr_one == doctest::Approx(0.0));
    CHECK(strict.asr_mia >= 0.0);
    CHECK(strict.asr_mia <= 1.0);
}

TEST_CASE("timestep sweep validates ranges and reruns deterministically") {
    Fixture f;
    int calls = 0;
    const auto runner = [&](int t) {
        ++calls;
        return run_mia_experiment(f.image_level, f.model, f.sched,
                                  [&] {
                                      ExperimentConfig e = f.ecfg;
                                      e.sampler.t_start = t;
                                      return e;
                                  }(),
                                  4, 1, 33);
    };
    const std::vector<int> values = {4, 8, 8};
    const auto rows = sweep_timesteps(values, f.sched.timesteps, runner);
    REQUIRE(rows.size() == 3);
    CHECK(calls == 3);
    // duplicate values give identical rows
    CHECK(rows[1].second.auc == rows[2].second.auc);
    CHECK(rows[1].second.accuracy == rows[2].second.accuracy);

    const std::vector<int> bad = {0};
    CHECK_THROWS_AS(sweep_timesteps(bad, f.sched.timesteps, runner), ConfigError);
    const std::vector<int> bad2 = {17};
    CHECK_THROWS_AS(sweep_timesteps(bad2, f.sched.timesteps, runner), ConfigError);
}

TEST_CASE("metric CSV writers produce the documented shapes") {
    Fixture f;
    const MetricsReport rep = run_mia_experiment(f.image_level, f.model, f.sched, f.ecfg, 4, 2, 5);
    const fs::path dir = fs::temp_directory_path() / "diffaudit_exp_test";
    fs::create_directories(dir);
    write_metrics_csv(rep, (dir / "metrics.csv").string());
    std::ifstream in(dir / "metrics.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "metric,run,value");
    int rows = 0, mean_rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.find(",mean,") != std::string::npos) ++mean_rows;
    }
    CHECK(rows == 4 * 2 + 4);  // 4 metrics x 2 runs + 4 mean rows
    CHECK(mean_rows == 4);

    std::vector<std::pair<int, MetricsReport>> sweep_rows = {{4, rep}, {8, rep}};
    write_sweep_csv(sweep_rows, (dir / "sweep.csv").string());
    write_sweep_dat(sweep_rows, (dir / "sweep.dat").string());
    std::ifstream sw(dir / "sweep.csv");
    std::getline(sw, line);
    CHECK(line == "t_start,accuracy,precision,recall,auc_roc");
    fs::remove_all(dir);
}
