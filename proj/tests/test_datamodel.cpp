#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "modechoice/datamodel.hpp"
#include "test_util.hpp"

using namespace modechoice;
using testutil::TempDir;
using testutil::write_file;

namespace {

struct Fixture {
    TempDir dir{"datamodel"};

    Fixture() {
        write_file(dir.file("queries.csv"),
                   "session_id,profile_id,timestamp,o_lng,o_lat,d_lng,d_lat\n"
                   "s1,p1,1000,116.30,39.90,116.40,39.95\n"
                   "s2,,2000,116.35,39.92,116.31,39.88\n"
                   "s3,p1,3000,116.20,39.80,116.45,40.00\n");
        write_file(dir.file("plans.csv"),
                   "session_id,display_rank,mode,distance_m,eta_s,price_cent\n"
                   "s1,1,3,8000,1200,0\n"
                   "s1,2,2,9000,1100,500\n"
                   "s2,1,1,5000,900,300\n"
                   "s2,2,5,4000,3000,\n"
                   "s3,1,4,12000,1000,3000\n");
        write_file(dir.file("clicks.csv"),
                   "session_id,timestamp,click_mode\n"
                   "s1,1010,2\n"
                   "s3,3005,4\n");
        write_file(dir.file("profiles.csv"),
                   "profile_id,p0,p1,p2\n"
                   "p1,1,0,1\n"
                   "p2,0,1,1\n");
    }

    std::vector<TripSession> load() const {
        return load_dataset(dir.file("queries.csv"), dir.file("plans.csv"), dir.file("clicks.csv"),
                            dir.file("profiles.csv"));
    }
};

} // namespace

TEST_CASE("load_dataset assembles sessions") {
    Fixture fx;
    const auto sessions = fx.load();
    REQUIRE(sessions.size() == 3);

    // ordered by timestamp
    REQUIRE(sessions[0].query.session_id == "s1");
    REQUIRE(sessions[1].query.session_id == "s2");
    REQUIRE(sessions[2].query.session_id == "s3");

    // field mapping of the first plan row
    const PlanOption& p = sessions[0].plans[0];
    REQUIRE(p.mode == 3);
    REQUIRE(p.distance_m == 8000.0);
    REQUIRE(p.eta_s == 1200.0);
    REQUIRE(p.price_cent == 0.0);
    REQUIRE(p.display_rank == 1);

    // labels: click, no click, click; empty price parses as 0
    REQUIRE(sessions[0].label == 2);
    REQUIRE(sessions[1].label == 0);
    REQUIRE(sessions[1].plans[1].price_cent == 0.0);
    REQUIRE(sessions[2].label == 4);

    // profile attachment
    REQUIRE(sessions[0].profile.has_value());
    REQUIRE(sessions[0].profile->attributes == std::vector<std::uint8_t>{1, 0, 1});
    REQUIRE(!sessions[1].profile.has_value());
}

TEST_CASE("loader rejects bad rows with file/line context") {
    Fixture fx;

    SECTION("mode out of range") {
        write_file(fx.dir.file("plans.csv"),
                   "session_id,display_rank,mode,distance_m,eta_s,price_cent\n"
                   "s1,1,12,8000,1200,0\n");
        try {
            fx.load();
            FAIL("expected DataError");
        } catch (const DataError& e) {
            const std::string msg = e.what();
            REQUIRE(msg.find("mode out of range 1..11") != std::string::npos);
            REQUIRE(msg.find("plans.csv:2") != std::string::npos);
        }
    }

    SECTION("click referencing unknown session") {
        write_file(fx.dir.file("clicks.csv"), "session_id,timestamp,click_mode\ns9,1,2\n");
        REQUIRE_THROWS_AS(fx.load(), DataError);
    }

    SECTION("click mode not displayed") {
        write_file(fx.dir.file("clicks.csv"), "session_id,timestamp,click_mode\ns1,1010,7\n");
        try {
            fx.load();
            FAIL("expected DataError");
        } catch (const DataError& e) {
            REQUIRE(std::string(e.what()).find("not in the displayed plan list") != std::string::npos);
        }
    }

    SECTION("malformed numeric field names file, line and column") {
        write_file(fx.dir.file("queries.csv"),
                   "session_id,profile_id,timestamp,o_lng,o_lat,d_lng,d_lat\n"
                   "s1,p1,1000,116.30,39.90,116.40,39.95\n"
                   "s2,,oops,116.35,39.92,116.31,39.88\n");
        try {
            fx.load();
            FAIL("expected DataError");
        } catch (const DataError& e) {
            const std::string msg = e.what();
            REQUIRE(msg.find("queries.csv:3") != std::string::npos);
            REQUIRE(msg.find("timestamp") != std::string::npos);
        }
    }

    SECTION("session without plans") {
        write_file(fx.dir.file("plans.csv"),
                   "session_id,display_rank,mode,distance_m,eta_s,price_cent\n"
                   "s1,1,3,8000,1200,0\n"
                   "s3,1,4,12000,1000,3000\n");
        write_file(fx.dir.file("clicks.csv"), "session_id,timestamp,click_mode\n");
        REQUIRE_THROWS_AS(fx.load(), DataError);
    }

    SECTION("duplicate display_rank") {
        write_file(fx.dir.file("plans.csv"),
                   "session_id,display_rank,mode,distance_m,eta_s,price_cent\n"
                   "s1,1,3,8000,1200,0\n"
                   "s1,1,2,9000,1100,500\n");
        REQUIRE_THROWS_AS(fx.load(), DataError);
    }

    SECTION("out-of-range coordinate") {
        write_file(fx.dir.file("queries.csv"),
                   "session_id,profile_id,timestamp,o_lng,o_lat,d_lng,d_lat\n"
                   "s1,p1,1000,191.0,39.90,116.40,39.95\n");
        REQUIRE_THROWS_AS(fx.load(), DataError);
    }
}

TEST_CASE("only the first click of a session counts") {
    Fixture fx;
    write_file(fx.dir.file("clicks.csv"),
               "session_id,timestamp,click_mode\n"
               "s1,1500,3\n"
               "s1,1010,2\n");
    const auto sessions = fx.load();
    REQUIRE(sessions[0].label == 2);
    REQUIRE(sessions[0].click_timestamp == 1010);
}

TEST_CASE("split_by_time partitions sessions") {
    Fixture fx;
    const auto sessions = fx.load();

    SECTION("cutoff before all timestamps: everything validates") {
        const auto [train, valid] = split_by_time(sessions, 500);
        REQUIRE(train.empty());
        REQUIRE(valid.size() == 3);
    }
    SECTION("cutoff after all timestamps: everything trains") {
        const auto [train, valid] = split_by_time(sessions, 5000);
        REQUIRE(train.size() == 3);
        REQUIRE(valid.empty());
    }
    SECTION("ten sessions cut at the sixth timestamp") {
        std::vector<TripSession> ten;
        for (int i = 0; i < 10; ++i) {
            TripSession s = sessions[0];
            s.query.session_id = "x" + std::to_string(i);
            s.query.timestamp = 100 * (i + 1);  // 100, 200, ..., 1000
            ten.push_back(s);
        }
        const auto [train, valid] = split_by_time(ten, 600);  // the sixth timestamp
        REQUIRE(train.size() == 5);
        REQUIRE(valid.size() == 5);
        REQUIRE(train.size() + valid.size() == ten.size());
        for (const auto& s : train) REQUIRE(s.query.timestamp < 600);
        for (const auto& s : valid) REQUIRE(s.query.timestamp >= 600);
    }
}

TEST_CASE("class distribution counts and ratios") {
    REQUIRE_THROWS_AS(class_distribution({}), DataError);

    Fixture fx;
    auto sessions = fx.load();
    // labels 2, 0, 4 plus one more 2
    sessions.push_back(sessions[0]);
    const auto dist = class_distribution(sessions);
    REQUIRE(dist.at(2).count == 2);
    REQUIRE(dist.at(2).ratio == Catch::Approx(0.5));
    REQUIRE(dist.at(0).ratio == Catch::Approx(0.25));
    REQUIRE(dist.at(4).ratio == Catch::Approx(0.25));
    double total = 0.0;
    for (const auto& [label, st] : dist) total += st.ratio;
    REQUIRE(total == Catch::Approx(1.0).margin(1e-12));

    const auto one = class_distribution({sessions[0]});
    REQUIRE(one.at(2).ratio == 1.0);
}

TEST_CASE("canonical write/load round trip is byte-identical") {
    Fixture fx;
    const auto sessions = fx.load();

    TempDir out1{"roundtrip1"};
    write_dataset(sessions, out1.file("queries.csv"), out1.file("plans.csv"), out1.file("clicks.csv"),
                  out1.file("profiles.csv"));
    const auto reloaded = load_dataset(out1.file("queries.csv"), out1.file("plans.csv"),
                                       out1.file("clicks.csv"), out1.file("profiles.csv"));
    REQUIRE(reloaded.size() == sessions.size());
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        REQUIRE(reloaded[i].query.session_id == sessions[i].query.session_id);
        REQUIRE(reloaded[i].label == sessions[i].label);
        REQUIRE(reloaded[i].plans.size() == sessions[i].plans.size());
    }

    TempDir out2{"roundtrip2"};
    write_dataset(reloaded, out2.file("queries.csv"), out2.file("plans.csv"), out2.file("clicks.csv"),
                  out2.file("profiles.csv"));
    for (const char* name : {"queries.csv", "plans.csv", "clicks.csv", "profiles.csv"}) {
        REQUIRE(testutil::read_file(out1.file(name)) == testutil::read_file(out2.file(name)));
        REQUIRE(!testutil::read_file(out1.file(name)).empty());
    }
}
