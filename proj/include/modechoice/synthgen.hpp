#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "modechoice/csv.hpp"
#include "modechoice/datamodel.hpp"
#include "modechoice/geo.hpp"
#include "modechoice/mnl.hpp"
#include "modechoice/rng.hpp"

namespace modechoice::synthgen {

inline constexpr int kNumPoiCategories = 33;

struct ModeTraits {
    double speed_mps = 0.0;
    double price_per_km_cent = 0.0;
    double flat_fare_cent = 0.0;
    double detour = 1.0;  // plan distance = haversine * detour
};

using Landmark = NamedPlace;

struct BBox {
    double lng_min = 116.10, lng_max = 116.70;
    double lat_min = 39.70, lat_max = 40.20;

    bool contains(const GeoPoint& p) const {
        return p.lng >= lng_min && p.lng <= lng_max && p.lat >= lat_min && p.lat <= lat_max;
    }
    GeoPoint clamp(GeoPoint p) const {
        p.lng = std::min(lng_max, std::max(lng_min, p.lng));
        p.lat = std::min(lat_max, std::max(lat_min, p.lat));
        return p;
    }
};

struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t n_sessions = 10000;
    std::size_t n_profiles = 200;
    std::size_t profile_dim = 66;
    double profile_missing_rate = 0.05;
    BBox bbox;
    std::vector<Landmark> landmarks = {
        {"airport", {116.60, 40.08}},
        {"mountain", {116.18, 39.99}},
        {"oldtown", {116.40, 39.90}},
    };
    double hotspot_rate = 0.35;  // morning/evening OD pull toward landmarks
    std::size_t bus_stations = 400;
    std::size_t metro_stations = 120;
    std::size_t poi_points = 20000;
    // 2018-10-01 .. 2018-12-01, local UTC+8
    std::int64_t start_ts = 1538323200;
    std::int64_t end_ts = 1543593600;
    int utc_offset_s = 8 * 3600;
    double no_click_rate = 0.09;
    double trip_km_log_mean = std::log(6.0);
    double trip_km_log_sigma = 0.8;

    // index 1..11; calibrated so drive is fastest and free, taxi expensive,
    // walk/bike free and slow, transit cheap with moderate speeds
    std::array<ModeTraits, kNumModes + 1> modes = {{
        {},                           // unused slot 0
        {5.5, 15.0, 200.0, 1.50},     // bus
        {9.0, 25.0, 300.0, 1.35},     // metro
        {12.0, 0.0, 0.0, 1.40},       // drive
        {11.0, 230.0, 1300.0, 1.40},  // taxi
        {1.3, 0.0, 0.0, 1.20},        // walk
        {3.5, 0.0, 0.0, 1.25},        // bike
        {7.5, 18.0, 400.0, 1.45},     // metro+bus
        {8.0, 120.0, 900.0, 1.45},    // bus+taxi
        {7.8, 20.0, 300.0, 1.30},     // metro+bike
        {9.5, 80.0, 800.0, 1.35},     // metro+taxi
        {7.0, 16.0, 400.0, 1.40},     // metro+bus+bike
    }};

    // Planted-choice model: distance coefficient per mode (baseline mode 8
    // fixed at 0) plus one cost coefficient across all modes. Utilities are
    // per meter / per cent, so coefficients live on the 1e-5..1e-3 scale.
    std::array<double, kNumModes + 1> distance_beta = {
        0.0,       // unused slot 0
        -8.0e-5,   // bus
        +1.5e-5,   // metro: tolerant of long trips
        -1.2e-4,   // drive
        -1.5e-4,   // taxi
        -4.0e-4,   // walk
        -2.5e-4,   // bike
        -4.0e-5,   // metro+bus
        0.0,       // bus+taxi (baseline)
        -5.0e-5,   // metro+bike
        -6.0e-5,   // metro+taxi
        -5.5e-5,   // metro+bus+bike
    };
    double cost_beta = -6.0e-4;

    mnl::UtilitySpec true_spec() const {
        auto spec = mnl::spec_by_name("distance_cost");
        spec.name = "planted";
        return spec;
    }

    /// Planted coefficients laid out exactly as the distance_cost spec's
    /// parameter vector (modes ascending, baseline skipped, cost last).
    std::vector<double> true_beta() const {
        std::vector<double> beta;
        for (int m = 1; m <= kNumModes; ++m) {
            if (m == 8) continue;
            beta.push_back(distance_beta[static_cast<std::size_t>(m)]);
        }
        beta.push_back(cost_beta);
        return beta;
    }

    void validate() const {
        if (no_click_rate < 0.0 || no_click_rate >= 1.0) throw ConfigError("no_click_rate must be in [0,1)");
        if (hotspot_rate < 0.0 || hotspot_rate > 1.0) throw ConfigError("hotspot_rate must be in [0,1]");
        if (bbox.lng_min >= bbox.lng_max || bbox.lat_min >= bbox.lat_max) throw ConfigError("invalid city bbox");
        if (end_ts <= start_ts) throw ConfigError("end_ts must be after start_ts");
        for (int m = 1; m <= kNumModes; ++m) {
            if (modes[static_cast<std::size_t>(m)].speed_mps <= 0) throw ConfigError("mode speeds must be > 0");
        }
        for (const auto& lm : landmarks) {
            if (!bbox.contains(lm.pos)) throw ConfigError("landmark '" + lm.name + "' outside city bbox");
        }
    }
};

struct TruthRow {
    int label = 0;
    std::array<double, kNumClasses> probs{};  // p0 = no click, p1..p11 per mode
};

struct SynthDataset {
    std::vector<TripSession> sessions;
    std::vector<UserProfile> profiles;
    std::vector<GeoPoint> bus_stations;
    std::vector<GeoPoint> metro_stations;
    std::map<std::string, std::array<std::uint32_t, kNumPoiCategories>> poi_counts;  // geohash-6 cell
    std::unordered_map<std::string, TruthRow> truth;
};

namespace detail {

inline GeoPoint uniform_point(Rng& rng, const BBox& b) {
    return {rng.uniform(b.lng_min, b.lng_max), rng.uniform(b.lat_min, b.lat_max)};
}

inline GeoPoint near_landmark(Rng& rng, const Landmark& lm, const BBox& b) {
    GeoPoint p{lm.pos.lng + 0.012 * rng.normal(), lm.pos.lat + 0.008 * rng.normal()};
    return b.clamp(p);
}

inline GeoPoint offset_point(const GeoPoint& origin, double distance_m, double bearing_rad) {
    constexpr double kMetersPerDegLat = 111320.0;
    const double dlat = distance_m * std::cos(bearing_rad) / kMetersPerDegLat;
    const double coslat = std::cos(origin.lat * 3.141592653589793 / 180.0);
    const double dlng = distance_m * std::sin(bearing_rad) / (kMetersPerDegLat * std::max(0.1, coslat));
    return {origin.lng + dlng, origin.lat + dlat};
}

} // namespace detail

/// Builds the whole synthetic city and its trip log in memory. Deterministic
/// given the config: one RNG stream drives profiles, stations, POIs, then
/// sessions in order.
inline SynthDataset generate(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);
    SynthDataset ds;

    // profiles: per-dimension base rates drawn once, then Bernoulli rows
    std::vector<double> dim_rate(config.profile_dim);
    for (auto& r : dim_rate) r = rng.uniform(0.05, 0.6);
    ds.profiles.reserve(config.n_profiles);
    for (std::size_t i = 0; i < config.n_profiles; ++i) {
        UserProfile p;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "p%06zu", i + 1);
        p.profile_id = buf;
        p.attributes.resize(config.profile_dim);
        for (std::size_t d = 0; d < config.profile_dim; ++d) {
            p.attributes[d] = rng.uniform() < dim_rate[d] ? 1 : 0;
        }
        ds.profiles.push_back(std::move(p));
    }

    ds.bus_stations.reserve(config.bus_stations);
    for (std::size_t i = 0; i < config.bus_stations; ++i) ds.bus_stations.push_back(detail::uniform_point(rng, config.bbox));
    ds.metro_stations.reserve(config.metro_stations);
    for (std::size_t i = 0; i < config.metro_stations; ++i) ds.metro_stations.push_back(detail::uniform_point(rng, config.bbox));

    for (std::size_t i = 0; i < config.poi_points; ++i) {
        const GeoPoint p = detail::uniform_point(rng, config.bbox);
        const std::size_t cat = rng.uniform_index(kNumPoiCategories);
        ds.poi_counts[geohash_encode(p.lng, p.lat, 6)][cat] += 1;
    }

    const mnl::UtilitySpec spec = config.true_spec();
    const std::vector<double> beta = config.true_beta();

    ds.sessions.reserve(config.n_sessions);
    for (std::size_t i = 0; i < config.n_sessions; ++i) {
        TripSession s;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%07zu", i + 1);
        s.query.session_id = buf;
        s.query.timestamp = config.start_ts +
                            static_cast<std::int64_t>(rng.uniform_index(
                                static_cast<std::size_t>(config.end_ts - config.start_ts)));
        if (!ds.profiles.empty() && rng.uniform() >= config.profile_missing_rate) {
            s.query.profile_id = ds.profiles[rng.uniform_index(ds.profiles.size())].profile_id;
        }

        const int local_hour = static_cast<int>(((s.query.timestamp + config.utc_offset_s) / 3600) % 24);
        const bool morning = local_hour >= 7 && local_hour < 10;
        const bool evening = local_hour >= 17 && local_hour < 20;
        const bool pull = !config.landmarks.empty() && (morning || evening) && rng.uniform() < config.hotspot_rate;
        if (pull) {
            const Landmark& lm = config.landmarks[rng.uniform_index(config.landmarks.size())];
            const GeoPoint anchor = detail::near_landmark(rng, lm, config.bbox);
            const GeoPoint other = detail::uniform_point(rng, config.bbox);
            // attraction points draw trips inward in the morning, outward in
            // the evening
            s.query.origin = morning ? other : anchor;
            s.query.destination = morning ? anchor : other;
        } else {
            s.query.origin = detail::uniform_point(rng, config.bbox);
            const double km = std::exp(config.trip_km_log_mean + config.trip_km_log_sigma * rng.normal());
            const double dist = std::min(40000.0, std::max(300.0, km * 1000.0));
            GeoPoint dest{};
            bool found = false;
            for (int attempt = 0; attempt < 10 && !found; ++attempt) {
                const double bearing = rng.uniform(0.0, 2.0 * std::numbers::pi);
                dest = detail::offset_point(s.query.origin, dist, bearing);
                found = config.bbox.contains(dest);
            }
            s.query.destination = found ? dest : config.bbox.clamp(dest);
        }

        // displayed subset of 4..8 modes
        const std::size_t n_disp = 4 + rng.uniform_index(5);
        const auto mode_idx = rng.sample_indices(kNumModes, n_disp);
        const double trip_m = haversine_m(s.query.origin, s.query.destination);
        for (const auto mi : mode_idx) {
            const int mode = static_cast<int>(mi) + 1;
            const ModeTraits& t = config.modes[static_cast<std::size_t>(mode)];
            PlanOption p;
            p.mode = mode;
            p.distance_m = std::max(1.0, std::round(trip_m * t.detour));
            p.eta_s = std::max(1.0, std::round(p.distance_m / t.speed_mps));
            p.price_cent = t.price_per_km_cent == 0.0 && t.flat_fare_cent == 0.0
                               ? 0.0
                               : std::round(t.flat_fare_cent + t.price_per_km_cent * p.distance_m / 1000.0);
            s.plans.push_back(p);
        }
        // display order: quickest plans first
        std::sort(s.plans.begin(), s.plans.end(), [](const PlanOption& a, const PlanOption& b) {
            if (a.eta_s != b.eta_s) return a.eta_s < b.eta_s;
            return a.mode < b.mode;
        });
        for (std::size_t r = 0; r < s.plans.size(); ++r) s.plans[r].display_rank = static_cast<int>(r) + 1;

        const std::vector<double> probs = mnl::choice_probabilities(spec, beta, s);
        TruthRow truth;
        truth.probs[0] = config.no_click_rate;
        for (std::size_t j = 0; j < s.plans.size(); ++j) {
            truth.probs[static_cast<std::size_t>(s.plans[j].mode)] = (1.0 - config.no_click_rate) * probs[j];
        }

        if (rng.uniform() < config.no_click_rate) {
            s.label = 0;
        } else {
            const double r = rng.uniform();
            double cum = 0.0;
            std::size_t pick = s.plans.size() - 1;
            for (std::size_t j = 0; j < s.plans.size(); ++j) {
                cum += probs[j];
                if (r < cum) {
                    pick = j;
                    break;
                }
            }
            s.label = s.plans[pick].mode;
            s.click_timestamp = s.query.timestamp + 5 + static_cast<std::int64_t>(rng.uniform_index(300));
        }
        truth.label = s.label;

        if (!s.query.profile_id.empty()) {
            for (const auto& p : ds.profiles) {
                if (p.profile_id == s.query.profile_id) {
                    s.profile = p;
                    break;
                }
            }
        }
        ds.truth[s.query.session_id] = truth;
        ds.sessions.push_back(std::move(s));
    }
    // same order a loader would produce
    std::sort(ds.sessions.begin(), ds.sessions.end(), [](const TripSession& a, const TripSession& b) {
        if (a.query.timestamp != b.query.timestamp) return a.query.timestamp < b.query.timestamp;
        return a.query.session_id < b.query.session_id;
    });
    return ds;
}

struct OutputPaths {
    std::string queries, plans, clicks, profiles, truth, stations, poi;

    static OutputPaths in_dir(const std::string& dir) {
        const std::string base = dir.empty() ? "" : dir + "/";
        return {base + "queries.csv", base + "plans.csv",   base + "clicks.csv", base + "profiles.csv",
                base + "truth.csv",   base + "stations.csv", base + "poi.csv"};
    }
};

/// Writes the four data tables plus the sidecars: truth.csv (planted label
/// and per-class choice probabilities), stations.csv and poi.csv (the
/// synthetic city's GIS layers consumed at featurization time).
inline void write(const SynthDataset& ds, const OutputPaths& paths) {
    write_sessions(ds.sessions, paths.queries, paths.plans, paths.clicks);
    write_profiles(ds.profiles, paths.profiles);

    CsvWriter truth(paths.truth);
    {
        std::string header = "session_id,true_label";
        for (int c = 0; c < kNumClasses; ++c) header += ",p" + format_int(c);
        truth.raw_line(header);
    }
    for (const TripSession* s : canonical_order(ds.sessions)) {
        const TruthRow& row = ds.truth.at(s->query.session_id);
        std::vector<std::string> fields{s->query.session_id, format_int(row.label)};
        for (int c = 0; c < kNumClasses; ++c) fields.push_back(format_double(row.probs[static_cast<std::size_t>(c)]));
        truth.row(fields);
    }
    truth.close();

    CsvWriter stations(paths.stations);
    stations.raw_line("network,lng,lat");
    for (const auto& p : ds.bus_stations) stations.row({"bus", format_double(p.lng), format_double(p.lat)});
    for (const auto& p : ds.metro_stations) stations.row({"metro", format_double(p.lng), format_double(p.lat)});
    stations.close();

    CsvWriter poi(paths.poi);
    {
        std::string header = "cell";
        for (int c = 0; c < kNumPoiCategories; ++c) header += ",c" + format_int(c);
        poi.raw_line(header);
    }
    for (const auto& [cell, counts] : ds.poi_counts) {
        std::vector<std::string> fields{cell};
        for (int c = 0; c < kNumPoiCategories; ++c) fields.push_back(format_int(counts[static_cast<std::size_t>(c)]));
        poi.row(fields);
    }
    poi.close();
}

struct ModeSummary {
    std::size_t n_plans = 0;
    double mean_price_cent = 0.0;
    double mean_speed_mps = 0.0;
};

/// Per-mode mean price and mean realized speed (distance/eta) over every
/// displayed plan. Plans with eta 0 cannot define a speed and are skipped
/// with a warning.
inline std::map<int, ModeSummary> mode_speed_price_summary(const std::vector<TripSession>& sessions) {
    std::map<int, ModeSummary> out;
    std::size_t skipped = 0;
    for (const auto& s : sessions) {
        for (const auto& p : s.plans) {
            if (p.eta_s == 0.0) {
                ++skipped;
                continue;
            }
            ModeSummary& m = out[p.mode];
            m.n_plans += 1;
            m.mean_price_cent += p.price_cent;
            m.mean_speed_mps += p.distance_m / p.eta_s;
        }
    }
    if (skipped > 0) {
        std::cerr << "warning: skipped " << skipped << " plans with eta 0 in speed/price summary\n";
    }
    for (auto& [mode, m] : out) {
        m.mean_price_cent /= static_cast<double>(m.n_plans);
        m.mean_speed_mps /= static_cast<double>(m.n_plans);
    }
    return out;
}

/// Flat key=value config file, '#' comments. Unknown keys are errors.
inline void apply_config_entry(SynthConfig& cfg, const std::string& key, const std::string& value) {
    const std::string ctx = "synth config key '" + key + "'";
    auto as_double = [&](const std::string& v) { return parse_double(v, ctx); };
    auto as_int = [&](const std::string& v) { return parse_int(v, ctx); };
    try {
        if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int(value));
        else if (key == "n_sessions") cfg.n_sessions = static_cast<std::size_t>(as_int(value));
        else if (key == "n_profiles") cfg.n_profiles = static_cast<std::size_t>(as_int(value));
        else if (key == "profile_dim") cfg.profile_dim = static_cast<std::size_t>(as_int(value));
        else if (key == "profile_missing_rate") cfg.profile_missing_rate = as_double(value);
        else if (key == "bus_stations") cfg.bus_stations = static_cast<std::size_t>(as_int(value));
        else if (key == "metro_stations") cfg.metro_stations = static_cast<std::size_t>(as_int(value));
        else if (key == "poi_points") cfg.poi_points = static_cast<std::size_t>(as_int(value));
        else if (key == "start_ts") cfg.start_ts = as_int(value);
        else if (key == "end_ts") cfg.end_ts = as_int(value);
        else if (key == "utc_offset_s") cfg.utc_offset_s = static_cast<int>(as_int(value));
        else if (key == "no_click_rate") cfg.no_click_rate = as_double(value);
        else if (key == "hotspot_rate") cfg.hotspot_rate = as_double(value);
        else if (key == "trip_km_log_mean") cfg.trip_km_log_mean = as_double(value);
        else if (key == "trip_km_log_sigma") cfg.trip_km_log_sigma = as_double(value);
        else if (key == "cost_beta") cfg.cost_beta = as_double(value);
        else if (key == "bbox") {
            const auto f = split(value, ',');
            if (f.size() != 4) throw ConfigError(ctx + ": expected lng_min,lng_max,lat_min,lat_max");
            cfg.bbox = {as_double(f[0]), as_double(f[1]), as_double(f[2]), as_double(f[3])};
        } else if (key == "landmarks") {
            // name:lng:lat;name:lng:lat;...
            cfg.landmarks.clear();
            for (const auto& item : split(value, ';')) {
                if (item.empty()) continue;
                const auto f = split(item, ':');
                if (f.size() != 3) throw ConfigError(ctx + ": expected name:lng:lat entries");
                cfg.landmarks.push_back({f[0], {as_double(f[1]), as_double(f[2])}});
            }
        } else if (key.rfind("mode.", 0) == 0) {
            const auto f = split(key, '.');
            if (f.size() != 3) throw ConfigError(ctx + ": expected mode.<id>.<field>");
            const auto mode = static_cast<std::size_t>(parse_int(f[1], ctx));
            if (mode < 1 || mode > kNumModes) throw ConfigError(ctx + ": mode out of range 1..11");
            if (f[2] == "speed") cfg.modes[mode].speed_mps = as_double(value);
            else if (f[2] == "price_per_km") cfg.modes[mode].price_per_km_cent = as_double(value);
            else if (f[2] == "flat_fare") cfg.modes[mode].flat_fare_cent = as_double(value);
            else if (f[2] == "detour") cfg.modes[mode].detour = as_double(value);
            else throw ConfigError(ctx + ": unknown mode field '" + f[2] + "'");
        } else if (key.rfind("distance_beta.", 0) == 0) {
            const auto mode = static_cast<std::size_t>(parse_int(key.substr(14), ctx));
            if (mode < 1 || mode > kNumModes) throw ConfigError(ctx + ": mode out of range 1..11");
            if (mode == 8) throw ConfigError(ctx + ": mode 8 is the baseline, its coefficient is fixed at 0");
            cfg.distance_beta[mode] = as_double(value);
        } else {
            throw ConfigError("unknown synth config key '" + key + "'");
        }
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

} // namespace modechoice::synthgen
