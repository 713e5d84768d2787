#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

#include "modechoice/datamodel.hpp"
#include "modechoice/synthgen.hpp"
#include "test_util.hpp"

using namespace modechoice;
using synthgen::SynthConfig;
using testutil::TempDir;

TEST_CASE("generation is deterministic: same config, byte-identical files") {
    SynthConfig cfg;
    cfg.n_sessions = 400;
    cfg.seed = 99;
    TempDir d1{"gen1"}, d2{"gen2"};
    synthgen::write(synthgen::generate(cfg), synthgen::OutputPaths::in_dir(d1.str()));
    synthgen::write(synthgen::generate(cfg), synthgen::OutputPaths::in_dir(d2.str()));
    for (const char* name : {"queries.csv", "plans.csv", "clicks.csv", "profiles.csv", "truth.csv",
                             "stations.csv", "poi.csv"}) {
        CAPTURE(name);
        const auto a = testutil::read_file(d1.file(name));
        REQUIRE(!a.empty());
        REQUIRE(a == testutil::read_file(d2.file(name)));
    }

    SynthConfig other = cfg;
    other.seed = 100;
    TempDir d3{"gen3"};
    synthgen::write(synthgen::generate(other), synthgen::OutputPaths::in_dir(d3.str()));
    REQUIRE(testutil::read_file(d1.file("queries.csv")) != testutil::read_file(d3.file("queries.csv")));
}

TEST_CASE("zero sessions produce headers-only tables") {
    SynthConfig cfg;
    cfg.n_sessions = 0;
    cfg.poi_points = 0;
    TempDir dir{"gen_empty"};
    synthgen::write(synthgen::generate(cfg), synthgen::OutputPaths::in_dir(dir.str()));
    REQUIRE(testutil::read_file(dir.file("queries.csv")) ==
            "session_id,profile_id,timestamp,o_lng,o_lat,d_lng,d_lat\n");
    REQUIRE(testutil::read_file(dir.file("plans.csv")) ==
            "session_id,display_rank,mode,distance_m,eta_s,price_cent\n");
    REQUIRE(testutil::read_file(dir.file("clicks.csv")) == "session_id,timestamp,click_mode\n");
}

TEST_CASE("generated data passes loader validation and stays in the bbox") {
    SynthConfig cfg;
    cfg.n_sessions = 500;
    cfg.seed = 4;
    const auto ds = synthgen::generate(cfg);
    TempDir dir{"gen_valid"};
    synthgen::write(ds, synthgen::OutputPaths::in_dir(dir.str()));

    const auto sessions = load_dataset(dir.file("queries.csv"), dir.file("plans.csv"),
                                       dir.file("clicks.csv"), dir.file("profiles.csv"));
    REQUIRE(sessions.size() == 500);
    for (const auto& s : sessions) {
        REQUIRE(cfg.bbox.contains(s.query.origin));
        REQUIRE(cfg.bbox.contains(s.query.destination));
        REQUIRE(s.plans.size() >= 4);
        REQUIRE(s.plans.size() <= 8);
        if (s.label != 0) REQUIRE(s.has_mode(s.label));
    }

    // sidecar truth has one row per session with the final label
    const auto truth = read_csv(dir.file("truth.csv"));
    REQUIRE(truth.rows.size() == 500);
}

TEST_CASE("labels match the planted mixture within 3-sigma binomial bounds") {
    SynthConfig cfg;
    cfg.n_sessions = 20000;
    cfg.seed = 12;
    const auto ds = synthgen::generate(cfg);

    std::array<double, kNumClasses> expected{}, variance{};
    std::array<double, kNumClasses> observed{};
    for (const auto& s : ds.sessions) {
        const auto& t = ds.truth.at(s.query.session_id);
        for (int c = 0; c < kNumClasses; ++c) {
            const double p = t.probs[static_cast<std::size_t>(c)];
            expected[static_cast<std::size_t>(c)] += p;
            variance[static_cast<std::size_t>(c)] += p * (1.0 - p);
        }
        observed[static_cast<std::size_t>(s.label)] += 1.0;
    }
    for (int c = 0; c < kNumClasses; ++c) {
        const auto k = static_cast<std::size_t>(c);
        const double sigma = std::sqrt(variance[k]);
        CAPTURE(c, observed[k], expected[k], sigma);
        REQUIRE(std::abs(observed[k] - expected[k]) <= 3.0 * sigma + 1.0);
    }
}

TEST_CASE("default configuration skews toward metro") {
    SynthConfig cfg;
    cfg.n_sessions = 8000;
    const auto ds = synthgen::generate(cfg);
    const auto dist = class_distribution(ds.sessions);
    const auto& metro = dist.at(2);
    for (const auto& [label, st] : dist) {
        if (label != 2) REQUIRE(metro.count >= st.count);
    }
}

TEST_CASE("metro share rises with trip distance when its planted coefficient tops the bus one") {
    SynthConfig cfg;
    cfg.n_sessions = 12000;
    cfg.seed = 3;
    REQUIRE(cfg.distance_beta[2] > cfg.distance_beta[1]);
    const auto ds = synthgen::generate(cfg);

    std::vector<double> trip(ds.sessions.size());
    for (std::size_t i = 0; i < ds.sessions.size(); ++i) {
        trip[i] = haversine_m(ds.sessions[i].query.origin, ds.sessions[i].query.destination);
    }
    auto sorted = trip;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[sorted.size() / 4];
    const double hi = sorted[3 * sorted.size() / 4];

    // Monte-Carlo estimate from the sidecar probabilities
    double p_long = 0.0, p_short = 0.0;
    std::size_t n_long = 0, n_short = 0;
    for (std::size_t i = 0; i < ds.sessions.size(); ++i) {
        const auto& t = ds.truth.at(ds.sessions[i].query.session_id);
        if (trip[i] >= hi) {
            p_long += t.probs[2];
            ++n_long;
        } else if (trip[i] <= lo) {
            p_short += t.probs[2];
            ++n_short;
        }
    }
    REQUIRE(n_long > 100);
    REQUIRE(n_short > 100);
    REQUIRE(p_long / static_cast<double>(n_long) > p_short / static_cast<double>(n_short));
}

TEST_CASE("mode speed/price summary") {
    SECTION("single plan") {
        TripSession s;
        s.plans = {{3, 8000.0, 1000.0, 0.0, 1}};
        const auto summary = synthgen::mode_speed_price_summary({s});
        REQUIRE(summary.at(3).mean_speed_mps == Catch::Approx(8.0));
        REQUIRE(summary.at(3).mean_price_cent == 0.0);
    }

    SECTION("two plans of one mode average their speeds") {
        TripSession s;
        s.plans = {{1, 4000.0, 1000.0, 100.0, 1}};
        TripSession t;
        t.plans = {{1, 6000.0, 1000.0, 200.0, 1}};
        const auto summary = synthgen::mode_speed_price_summary({s, t});
        REQUIRE(summary.at(1).mean_speed_mps == Catch::Approx(5.0));
        REQUIRE(summary.at(1).mean_price_cent == Catch::Approx(150.0));
    }

    SECTION("zero-eta plans are excluded") {
        TripSession s;
        s.plans = {{1, 4000.0, 0.0, 100.0, 1}, {1, 6000.0, 1000.0, 100.0, 2}};
        const auto summary = synthgen::mode_speed_price_summary({s});
        REQUIRE(summary.at(1).n_plans == 1);
        REQUIRE(summary.at(1).mean_speed_mps == Catch::Approx(6.0));
    }

    SECTION("drive is fastest and free under the default catalog") {
        SynthConfig cfg;
        cfg.n_sessions = 3000;
        const auto ds = synthgen::generate(cfg);
        const auto summary = synthgen::mode_speed_price_summary(ds.sessions);
        const auto& drive = summary.at(3);
        REQUIRE(drive.mean_price_cent == 0.0);
        for (const auto& [mode, m] : summary) {
            if (mode != 3) REQUIRE(drive.mean_speed_mps > m.mean_speed_mps);
        }
    }
}

TEST_CASE("synth config parsing") {
    SynthConfig cfg;
    synthgen::apply_config_entry(cfg, "n_sessions", "123");
    REQUIRE(cfg.n_sessions == 123);
    synthgen::apply_config_entry(cfg, "mode.3.speed", "15.5");
    REQUIRE(cfg.modes[3].speed_mps == 15.5);
    synthgen::apply_config_entry(cfg, "distance_beta.2", "2e-5");
    REQUIRE(cfg.distance_beta[2] == 2e-5);
    synthgen::apply_config_entry(cfg, "landmarks", "a:116.2:39.8;b:116.5:40.0");
    REQUIRE(cfg.landmarks.size() == 2);
    REQUIRE(cfg.landmarks[1].name == "b");

    REQUIRE_THROWS_AS(synthgen::apply_config_entry(cfg, "bogus_key", "1"), ConfigError);
    REQUIRE_THROWS_AS(synthgen::apply_config_entry(cfg, "distance_beta.8", "1e-5"), ConfigError);
    REQUIRE_THROWS_AS(synthgen::apply_config_entry(cfg, "n_sessions", "abc"), ConfigError);

    SynthConfig bad;
    bad.no_click_rate = 1.5;
    REQUIRE_THROWS_AS(synthgen::generate(bad), ConfigError);
}
