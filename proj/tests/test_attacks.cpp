#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "diffaudit/attacks.hpp"
#include "diffaudit/errors.hpp"
#include "diffaudit/rng.hpp"

using namespace diffaudit;

namespace {

struct Fixture {
    NoiseSchedule sched = make_linear_schedule(20, 1e-3, 0.04);
    FaceDataset ds = generate_dataset(4, 2, 32, 32, 1, 0.5, SplitMode::image_level, 400);
    Denoiser model = Denoiser::init(32, 32, 1, 8, 24, 17);
    MaskSuite occluding;
    MaskSuite preserving;
    SamplerConfig cfg;

    Fixture() {
        occluding = build_occluding_suite(ds.entries[0].landmarks, 32, 32, 3, 8, 5);
        preserving = build_preserving_suite(ds.entries[0].landmarks, 32, 32, 4, 5);
        cfg.kind = SamplerKind::deterministic;
        cfg.t_start = 10;
        cfg.record_every = 2;
        cfg.rng_seed = 99;
    }
};

}  // namespace

TEST_CASE("confidence formula: zero stats give 1, unit mean variability gives 0.5") {
    std::vector<MaskStats> zeros(5);
    CHECK(mia_confidence_from_stats(zeros) == doctest::Approx(1.0));

    // mean per-mask (CV + |S| + dE) = 1
    std::vector<MaskStats> ones(4);
    for (auto& s : ones) {
        s.cv = 0.5;
        s.skewness = -0.25;
        s.mean_rate_of_change = 0.25;
    }
    CHECK(mia_confidence_from_stats(ones) == doctest::Approx(0.5));
}

TEST_CASE("confidence strictly decreases in each variability component") {
    std::vector<MaskStats> base(3);
    for (auto& s : base) {
        s.cv = 0.2;
        s.skewness = 0.1;
        s.mean_rate_of_change = 0.05;
    }
    const double c0 = mia_confidence_from_stats(base);
    CHECK(c0 > 0.0);
    CHECK(c0 <= 1.0);

    auto bumped = base;
    bumped[1].cv += 0.1;
    CHECK(mia_confidence_from_stats(bumped) < c0);
    bumped = base;
    bumped[1].skewness = -0.3;  // larger |S|
    CHECK(mia_confidence_from_stats(bumped) < c0);
    bumped = base;
    bumped[2].mean_rate_of_change += 0.2;
    CHECK(mia_confidence_from_stats(bumped) < c0);
}

TEST_CASE("identity score formula and monotonicity") {
    CHECK(iia_score(0.0, 0.0) == doctest::Approx(1.0));
    CHECK(iia_score(std::log(2.0), 0.0) == doctest::Approx(0.5));
    CHECK(iia_score(0.0, std::log(2.0)) == doctest::Approx(0.5));
    // paired evaluations: increasing either argument decreases the score
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const double mu = rng.next_double() * 2.0;
        const double sigma = rng.next_double();
        const double s = iia_score(mu, sigma);
        CHECK(s > 0.0);
        CHECK(s <= 1.0);
        CHECK(iia_score(mu + 0.1, sigma) < s);
        CHECK(iia_score(mu, sigma + 0.1) < s);
    }
}

TEST_CASE("mia attack returns a confidence in (0,1] with per-mask stats") {
    Fixture f;
    const auto& e = f.ds.entries[0];
    const MiaResult r =
        mia_attack(e.image, e.landmarks, f.model, f.sched, f.occluding, f.cfg, 0.6, 2);
    CHECK(r.confidence > 0.0);
    CHECK(r.confidence <= 1.0);
    CHECK(r.per_mask.size() == f.occluding.masks.size());
    CHECK(r.is_member == (r.confidence >= 0.6));
    for (const auto& [label, stats] : r.per_mask) {
        CHECK(!label.empty());
        CHECK(stats.mean >= 0.0);
    }
}

TEST_CASE("mia confidence is invariant under mask-suite reordering") {
    Fixture f;
    const auto& e = f.ds.entries[0];
    const MiaResult a =
        mia_attack(e.image, e.landmarks, f.model, f.sched, f.occluding, f.cfg, 0.6, 2);

    MaskSuite shuffled = f.occluding;
    std::reverse(shuffled.masks.begin(), shuffled.masks.end());
    const MiaResult b = mia_attack(e.image, e.landmarks, f.model, f.sched, shuffled, f.cfg, 0.6, 2);
    CHECK(a.confidence == b.confidence);

    // and deterministic across repeated runs / worker counts
    const MiaResult c = mia_attack(e.image, e.landmarks, f.model, f.sched, f.occluding, f.cfg, 0.6, 1);
    CHECK(a.confidence == c.confidence);
}

TEST_CASE("mia rejects preserving suites and bad thresholds") {
    Fixture f;
    const auto& e = f.ds.entries[0];
    CHECK_THROWS_AS(mia_attack(e.image, e.landmarks, f.model, f.sched, f.preserving, f.cfg, 0.6, 1),
                    ConfigError);
    CHECK_THROWS_AS(mia_attack(e.image, e.landmarks, f.model, f.sched, f.occluding, f.cfg, 0.0, 1),
                    ConfigError);
}

TEST_CASE("iia attack: scores in (0,1], decision at threshold, reorder invariance") {
    Fixture f;
    std::vector<Image> queries;
    std::vector<LandmarkMap> landmarks;
    for (const auto& e : f.ds.entries) {
        if (e.identity_id == 1) {
            queries.push_back(e.image);
            landmarks.push_back(e.landmarks);
        }
    }
    REQUIRE(queries.size() == 2);
    const IiaResult a = iia_attack(queries, landmarks, f.model, f.sched, f.occluding, f.cfg, 0.5, 2);
    CHECK(a.score > 0.0);
    CHECK(a.score <= 1.0);
    CHECK(a.per_query.size() == 2);
    CHECK(a.score == doctest::Approx(iia_score(a.mu_overall, a.sigma_overall)));
    CHECK(a.is_member == (a.score >= 0.5));

    std::swap(queries[0], queries[1]);
    std::swap(landmarks[0], landmarks[1]);
    const IiaResult b = iia_attack(queries, landmarks, f.model, f.sched, f.occluding, f.cfg, 0.5, 2);
    CHECK(a.score == b.score);
    CHECK(a.mu_overall == b.mu_overall);
    CHECK(a.sigma_overall == b.sigma_overall);
}

TEST_CASE("iia rejects empty query lists and mismatched landmarks") {
    Fixture f;
    CHECK_THROWS_AS(iia_attack({}, {}, f.model, f.sched, f.occluding, f.cfg, 0.5, 1), DataError);
    std::vector<Image> queries = {f.ds.entries[0].image};
    std::vector<LandmarkMap> none;
    CHECK_THROWS_AS(iia_attack(queries, none, f.model, f.sched, f.occluding, f.cfg, 0.5, 1),
                    DataError);
}

TEST_CASE("extraction produces k representatives drawn from the reconstructions") {
    Fixture f;
    const auto& e = f.ds.entries[0];
    const ClusterResult r =
        extraction_attack(e.image, e.landmarks, f.model, f.sched, f.preserving, 12, 3, f.cfg, 2);
    CHECK(r.k == 3);
    CHECK(r.representatives.size() == 3);
    CHECK(r.representative_indices.size() == 3);
    for (int idx : r.representative_indices) {
        CHECK(idx >= 0);
        CHECK(idx < 12);
    }
    for (const auto& rep : r.representatives) {
        CHECK(rep.same_shape(e.image));
        for (double p : rep.pixels) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
    CHECK(r.inertia >= 0.0);
    CHECK(r.assignments.size() == 12);
}

TEST_CASE("extraction with n_samples == k makes every sample its own representative") {
    Fixture f;
    const auto& e = f.ds.entries[0];
    const ClusterResult r =
        extraction_attack(e.image, e.landmarks, f.model, f.sched, f.preserving, 5, 5, f.cfg, 2);
    CHECK(r.inertia == doctest::Approx(0.0).epsilon(1e-12));
    std::set<int> reps(r.representative_indices.begin(), r.representative_indices.end());
    CHECK(reps.size() == 5);
}

TEST_CASE("extraction requires a preserving suite and n_samples >= k") {
    Fixture f;
    const auto& e = f.ds.entries[0];
    CHECK_THROWS_AS(
        extraction_attack(e.image, e.landmarks, f.model, f.sched, f.occluding, 10, 2, f.cfg, 1),
        ConfigError);
    CHECK_THROWS_AS(
        extraction_attack(e.image, e.landmarks, f.model, f.sched, f.preserving, 2, 5, f.cfg, 1),
        ConfigError);
}

TEST_CASE("extraction is deterministic and independent of the worker count") {
    Fixture f;
    const auto& e = f.ds.entries[0];
    const ClusterResult a =
        extraction_attack(e.image, e.landmarks, f.model, f.sched, f.preserving, 8, 2, f.cfg, 1);
    const ClusterResult b =
        extraction_attack(e.image, e.landmarks, f.model, f.sched, f.preserving, 8, 2, f.cfg, 4);
    CHECK(a.assignments == b.assignments);
    CHECK(a.inertia == b.inertia);
    REQUIRE(a.representatives.size() == b.representatives.size());
    for (std::size_t i = 0; i < a.representatives.size(); ++i) {
        CHECK(a.representatives[i].pixels == b.representatives[i].pixels);
    }
}
